import { ApiClient } from "./client";
import { JobStatus } from "./types";

/**
 * Poll an extraction job every `intervalMs` (1 s by default) until it reaches
 * a terminal state. `onTick` fires after every poll so callers can render
 * progress. Resolves with the final job status; rejects when the job failed.
 */
export async function pollJob(
  api: ApiClient,
  jobId: string,
  onTick?: (job: JobStatus) => void,
  intervalMs = 1000,
): Promise<JobStatus> {
  for (;;) {
    const job = await api.getJob(jobId);
    onTick?.(job);
    if (job.status === "succeeded") return job;
    if (job.status === "failed") {
      throw new Error(job.error ?? "extraction failed");
    }
    await new Promise((resolve) => setTimeout(resolve, intervalMs));
  }
}
