/** DOM wiring: panes, controls, overlays, and the render scheduling. */

import { FrameResponse, FrameServiceClient, RenderRequest, ServiceError } from './api.js';
import { dragOrbit, frameBounds, zoomOrbit } from './orbit.js';
import { LatestWins } from './scheduler.js';
import { clampSV, matchedTopkMode, Store, S_V_MAX, S_V_MIN, S_V_STEP } from './state.js';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function statsLine(stats: FrameResponse | null): string {
  if (!stats) {
    return '…';
  }
  const pct = (100 * stats.eta_actual).toFixed(1);
  return (
    `${stats.rendered_count} / ${stats.n_total} splats (${pct}%)` +
    ` · ${stats.render_ms.toFixed(0)} ms`
  );
}

export function startViewer(baseUrl: string): void {
  const client = new FrameServiceClient(baseUrl);
  const store = new Store();

  const sceneSelect = el<HTMLSelectElement>('scene-select');
  const svSlider = el<HTMLInputElement>('sv-slider');
  const svValue = el<HTMLSpanElement>('sv-value');
  const tauInput = el<HTMLInputElement>('tau-input');
  const modeSelect = el<HTMLSelectElement>('mode-select');
  const splitToggle = el<HTMLInputElement>('split-toggle');
  const banner = el<HTMLDivElement>('banner');
  const panes = {
    left: {
      img: el<HTMLImageElement>('frame-left'),
      overlay: el<HTMLDivElement>('overlay-left'),
      wrap: el<HTMLDivElement>('pane-left'),
    },
    right: {
      img: el<HTMLImageElement>('frame-right'),
      overlay: el<HTMLDivElement>('overlay-right'),
      wrap: el<HTMLDivElement>('pane-right'),
    },
  };

  svSlider.min = String(S_V_MIN);
  svSlider.max = String(S_V_MAX);
  svSlider.step = String(S_V_STEP);

  const showBanner = (text: string | null) => {
    store.update({ banner: text });
    banner.textContent = text ?? '';
    banner.style.display = text ? 'block' : 'none';
  };

  const makePane = (side: 'left' | 'right') =>
    new LatestWins<RenderRequest, FrameResponse>(
      (req) => client.renderFrame(req),
      (res) => {
        // swap without flicker: only replace src once the payload is here
        panes[side].img.src = `data:image/png;base64,${res.image_b64}`;
        panes[side].overlay.textContent = statsLine(res);
        store.update({
          lastStats: { ...store.get().lastStats, [side]: res },
        });
        showBanner(null);
        // fresh count from the filtered pane: re-match the pruned pane
        const s = store.get();
        if (s.split && side === 'right' && s.left.mode.startsWith('topk')) {
          const req2 = requestFor('left');
          if (req2) {
            schedulers.left.request(req2);
          }
        }
      },
      (err) => {
        if (err instanceof ServiceError) {
          showBanner(`render failed: ${err.code}: ${err.message}`);
        } else {
          showBanner('service unreachable; retrying on next interaction');
        }
      },
    );
  const schedulers = { left: makePane('left'), right: makePane('right') };

  const requestFor = (side: 'left' | 'right'): RenderRequest | null => {
    const s = store.get();
    if (!s.sceneId) {
      return null;
    }
    let mode = s.split ? s[side].mode : s.mode;
    if (s.split && mode.startsWith('topk')) {
      // match the filtered pane's latest rendered count
      const other = side === 'left' ? 'right' : 'left';
      mode = matchedTopkMode(s.lastStats[other]);
    }
    return {
      scene: s.sceneId,
      width: s.size,
      height: s.size,
      s_v: s.sV,
      tau: s.tau,
      mode,
      orbit: s.orbit,
    };
  };

  const refresh = () => {
    const s = store.get();
    panes.right.wrap.style.display = s.split ? 'block' : 'none';
    const sides: Array<'left' | 'right'> = s.split ? ['left', 'right'] : ['left'];
    for (const side of sides) {
      const req = requestFor(side);
      if (req) {
        schedulers[side].request(req);
      }
    }
  };

  sceneSelect.addEventListener('change', () => {
    const s = store.get();
    const info = s.scenes.find((sc) => sc.id === sceneSelect.value);
    const patch: Record<string, unknown> = { sceneId: sceneSelect.value };
    if (info?.bounds) {
      patch.orbit = frameBounds(info.bounds.min, info.bounds.max);
    }
    store.update(patch);
    refresh();
  });

  svSlider.addEventListener('input', () => {
    const v = clampSV(parseFloat(svSlider.value));
    svValue.textContent = v.toFixed(1);
    store.update({ sV: v });
    refresh();
  });

  tauInput.addEventListener('change', () => {
    const v = parseFloat(tauInput.value);
    if (Number.isFinite(v) && v > 0 && v < 1) {
      store.update({ tau: v });
      refresh();
    }
  });

  modeSelect.addEventListener('change', () => {
    store.update({ mode: modeSelect.value as never });
    refresh();
  });

  splitToggle.addEventListener('change', () => {
    store.update({
      split: splitToggle.checked,
      left: { mode: 'topk:1' },
      right: { mode: 'clod' },
    });
    refresh();
  });

  // shared orbit interaction on both panes
  for (const side of ['left', 'right'] as const) {
    const img = panes[side].img;
    let dragging = false;
    let last: [number, number] = [0, 0];
    img.addEventListener('pointerdown', (ev) => {
      dragging = true;
      last = [ev.clientX, ev.clientY];
      img.setPointerCapture(ev.pointerId);
    });
    img.addEventListener('pointermove', (ev) => {
      if (!dragging) {
        return;
      }
      const [dx, dy] = [ev.clientX - last[0], ev.clientY - last[1]];
      last = [ev.clientX, ev.clientY];
      store.update({ orbit: dragOrbit(store.get().orbit, dx, dy) });
      refresh();
    });
    img.addEventListener('pointerup', () => {
      dragging = false;
    });
    img.addEventListener('wheel', (ev) => {
      ev.preventDefault();
      store.update({ orbit: zoomOrbit(store.get().orbit, ev.deltaY) });
      refresh();
    });
  }

  client
    .listScenes()
    .then((scenes) => {
      store.update({ scenes });
      sceneSelect.innerHTML = '';
      for (const scene of scenes) {
        const opt = document.createElement('option');
        opt.value = scene.id;
        opt.textContent = scene.error
          ? `${scene.id} (unloadable)`
          : `${scene.id} (${scene.n_total} splats)`;
        opt.disabled = Boolean(scene.error);
        sceneSelect.appendChild(opt);
      }
      const first = scenes.find((s) => !s.error);
      if (first) {
        sceneSelect.value = first.id;
        sceneSelect.dispatchEvent(new Event('change'));
      } else {
        showBanner('no loadable scenes in the service directory');
      }
    })
    .catch(() => showBanner('cannot reach the frame service'));
}
