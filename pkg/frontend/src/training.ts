// Trigger a training run and follow it to a terminal state. The UI keeps
// exactly one poll loop in flight; the train button stays disabled while a
// job runs, and a failed job leaves the previous snapshot untouched.

import { api, ApiError } from "./api.js";
import type { JobView } from "./types.js";

export interface TrainingCallbacks {
  onStateChange?: (job: JobView) => void;
  onDone?: (job: JobView) => void;
  onFailed?: (job: JobView) => void;
  onBusy?: () => void;
}

export async function pollJob(
  pid: string,
  jobId: string,
  intervalMs = 500,
  client: typeof api = api,
): Promise<JobView> {
  for (;;) {
    const job = await client.getJob(pid, jobId);
    if (job.state === "done" || job.state === "failed" || job.state === "cancelled") {
      return job;
    }
    await new Promise((resolve) => setTimeout(resolve, intervalMs));
  }
}

/**
 * Researcher-paced auto-retraining: when enabled, every N applied codes
 * request one training run. Counting is explicit so the policy stays
 * testable apart from the DOM.
 */
export class RetrainPolicy {
  enabled = false;
  threshold = 5;
  private count = 0;

  configure(enabled: boolean, threshold: number): void {
    this.enabled = enabled;
    if (Number.isFinite(threshold) && threshold >= 1) {
      this.threshold = Math.floor(threshold);
    }
  }

  /** Record one applied code; true when a retrain should fire now. */
  noteCode(): boolean {
    if (!this.enabled) {
      return false;
    }
    this.count += 1;
    if (this.count >= this.threshold) {
      this.count = 0;
      return true;
    }
    return false;
  }

  reset(): void {
    this.count = 0;
  }
}

export class TrainingController {
  private pid: string;
  private callbacks: TrainingCallbacks;
  private client: typeof api;
  private inFlight = false;
  private intervalMs: number;

  constructor(
    pid: string,
    callbacks: TrainingCallbacks = {},
    client: typeof api = api,
    intervalMs = 500,
  ) {
    this.pid = pid;
    this.callbacks = callbacks;
    this.client = client;
    this.intervalMs = intervalMs;
  }

  get running(): boolean {
    return this.inFlight;
  }

  async trigger(overrides: Record<string, unknown> = {}): Promise<JobView | null> {
    if (this.inFlight) {
      this.callbacks.onBusy?.();
      return null;
    }
    this.inFlight = true;
    try {
      let job = await this.client.startTraining(this.pid, overrides);
      this.callbacks.onStateChange?.(job);
      job = await pollJob(this.pid, job.job_id, this.intervalMs, this.client);
      this.callbacks.onStateChange?.(job);
      if (job.state === "done") {
        this.callbacks.onDone?.(job);
      } else {
        this.callbacks.onFailed?.(job);
      }
      return job;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.callbacks.onBusy?.();
        return null;
      }
      throw err;
    } finally {
      this.inFlight = false;
    }
  }
}
