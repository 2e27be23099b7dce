/**
 * Lexicon sentiment classifier: logistic of summed token weights.
 *
 * Deterministic, inference-only, and strong enough to act as the served
 * victim model for audit smoke runs.
 */

const WEIGHTS: Record<string, number> = {
  deep: 1.2,
  meaningful: 1.3,
  moving: 1.1,
  charming: 1.2,
  gem: 1.6,
  heart: 0.7,
  indeed: 0.2,
  film: 0.1,
  story: 0.1,
  profound: 1.0,
  movie: -0.2,
  no: -0.5,
  unhealthy: -0.9,
  dull: -1.3,
  boring: -1.4,
  bad: -1.6,
  mess: -1.5,
};

function logistic(z: number): number {
  if (z >= 0) {
    return 1 / (1 + Math.exp(-z));
  }
  const ez = Math.exp(z);
  return ez / (1 + ez);
}

export class LexiconClassifier {
  predict(sentences: string[][]): number[] {
    return sentences.map((tokens) => {
      let score = 0;
      for (const token of tokens) {
        score += WEIGHTS[token] ?? 0;
      }
      return logistic(score);
    });
  }
}
