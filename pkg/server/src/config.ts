/** Server configuration from environment variables. */

export interface ServerConfig {
  classifier: string;
  fillmask: string;
  perplexity: string;
  port: number;
  maxBatch: number;
  device: string;
}

export function configFromEnv(env: NodeJS.ProcessEnv = process.env): ServerConfig {
  const maxBatch = parseInt(env.MAX_BATCH ?? "256", 10);
  if (!Number.isInteger(maxBatch) || maxBatch < 1) {
    throw new Error(`MAX_BATCH must be a positive integer, got ${env.MAX_BATCH}`);
  }
  return {
    classifier: env.MODEL_CLASSIFIER ?? "builtin:lexicon",
    fillmask: env.MODEL_FILLMASK ?? "builtin:bigram",
    perplexity: env.MODEL_PPL ?? "builtin:bigram",
    port: parseInt(env.PORT ?? "8080", 10),
    maxBatch,
    device: env.DEVICE ?? "cpu",
  };
}
