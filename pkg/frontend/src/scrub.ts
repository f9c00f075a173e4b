// Slider scrubbing with a request budget: at most one in-flight request per
// panel, a hard cap of maxPerSecond issued requests, and responses whose
// coefficient has been superseded discarded instead of rendered.

export interface ScrubResult<R> {
  lambda: number;
  response: R;
}

export class LambdaScrubber<R> {
  private latest: number | null = null;
  private issuedLatest = true;
  private counter = 0;
  private inFlight = false;
  private lastIssuedAt = -Infinity;
  private timer: ReturnType<typeof setTimeout> | null = null;
  readonly minIntervalMs: number;
  issuedCount = 0;

  constructor(
    private send: (lambda: number) => Promise<R>,
    private settle: (result: ScrubResult<R>) => void,
    maxPerSecond = 4,
    private discarded: (lambda: number) => void = () => {},
  ) {
    this.minIntervalMs = Math.ceil(1000 / maxPerSecond);
  }

  /** Called on every slider movement; coalesces into rate-limited requests. */
  scrub(lambda: number): void {
    this.latest = lambda;
    this.issuedLatest = false;
    this.schedule();
  }

  private schedule(): void {
    if (this.timer !== null || this.inFlight) {
      return;
    }
    const wait = Math.max(0, this.lastIssuedAt + this.minIntervalMs - Date.now());
    this.timer = setTimeout(() => {
      this.timer = null;
      this.fire();
    }, wait);
  }

  private fire(): void {
    if (this.inFlight || this.issuedLatest || this.latest === null) {
      return;
    }
    const lambda = this.latest;
    const id = ++this.counter;
    this.issuedLatest = true;
    this.inFlight = true;
    this.lastIssuedAt = Date.now();
    this.issuedCount += 1;
    const finish = (deliver: (() => void) | null) => {
      this.inFlight = false;
      if (deliver && id === this.counter && this.latest === lambda) {
        deliver();
      } else {
        this.discarded(lambda);
      }
      if (!this.issuedLatest) {
        this.schedule(); // a newer coefficient arrived while we were busy
      }
    };
    this.send(lambda).then(
      (response) => finish(() => this.settle({ lambda, response })),
      () => finish(null),
    );
  }
}
