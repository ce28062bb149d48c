/** Latest-wins render scheduling.
 *
 * Each pane keeps at most one request in flight; interactions arriving while
 * busy replace the pending request (never queue up), and a response is
 * delivered only if it still corresponds to the newest request, so stale
 * frames can never overwrite newer ones.
 */

export interface ScheduledResult<T> {
  value: T;
  token: number;
}

export class LatestWins<Req, Res> {
  private inFlight = false;
  private pending: Req | null = null;
  private token = 0;
  private readonly run: (req: Req) => Promise<Res>;
  private readonly onResult: (res: Res, req: Req) => void;
  private readonly onError: (err: unknown, req: Req) => void;

  constructor(
    run: (req: Req) => Promise<Res>,
    onResult: (res: Res, req: Req) => void,
    onError: (err: unknown, req: Req) => void = () => undefined,
  ) {
    this.run = run;
    this.onResult = onResult;
    this.onError = onError;
  }

  /** Submit a request; supersedes any pending one. */
  request(req: Req): void {
    this.token += 1;
    if (this.inFlight) {
      this.pending = req;
      return;
    }
    void this.launch(req, this.token);
  }

  get busy(): boolean {
    return this.inFlight;
  }

  private async launch(req: Req, token: number): Promise<void> {
    this.inFlight = true;
    try {
      const res = await this.run(req);
      if (token === this.token) {
        this.onResult(res, req);
      }
    } catch (err) {
      if (token === this.token) {
        this.onError(err, req);
      }
    } finally {
      this.inFlight = false;
      if (this.pending !== null) {
        const next = this.pending;
        this.pending = null;
        void this.launch(next, this.token);
      }
    }
  }
}
