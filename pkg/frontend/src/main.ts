/** Entry point: base URL comes from ?service=... or defaults to port 7878. */

import { startViewer } from './app.js';

const params = new URLSearchParams(window.location.search);
const base = params.get('service') ?? 'http://127.0.0.1:7878';
startViewer(base);
