/**
 * Provider registry: maps configured model identifiers onto backends.
 *
 * Unknown identifiers leave the slot unavailable; the corresponding endpoint
 * then answers 503 instead of failing at startup, so one server process can
 * expose whichever models it actually has.
 */

import { BigramModel } from "./builtin/bigram";
import { CORPUS } from "./builtin/corpus";
import { LexiconClassifier } from "./builtin/lexicon";
import { MaskCandidates } from "./tokens";
import { ServerConfig } from "./config";

export interface ClassifierProvider {
  predict(sentences: string[][]): number[];
}

export interface FillMaskProvider {
  fill(tokens: string[], index: number, topK: number): MaskCandidates;
}

export interface PerplexityProvider {
  perplexity(tokens: string[]): number;
}

export interface ProviderSet {
  ids: { classifier: string; fillmask: string; perplexity: string };
  classifier?: ClassifierProvider;
  fillmask?: FillMaskProvider;
  perplexity?: PerplexityProvider;
}

export const BUILTIN_CLASSIFIER = "builtin:lexicon";
export const BUILTIN_BIGRAM = "builtin:bigram";

export function buildProviders(config: ServerConfig): ProviderSet {
  const bigram = new BigramModel(CORPUS);
  const set: ProviderSet = {
    ids: {
      classifier: config.classifier,
      fillmask: config.fillmask,
      perplexity: config.perplexity,
    },
  };
  if (config.classifier === BUILTIN_CLASSIFIER) {
    set.classifier = new LexiconClassifier();
  }
  if (config.fillmask === BUILTIN_BIGRAM) {
    set.fillmask = bigram;
  }
  if (config.perplexity === BUILTIN_BIGRAM) {
    set.perplexity = bigram;
  }
  return set;
}
