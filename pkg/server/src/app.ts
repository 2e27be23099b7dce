/**
 * The oracle protocol over HTTP (JSON, UTF-8):
 *
 *   POST /v1/predict     {"texts": [...]}                          -> {"probs": [...]}
 *   POST /v1/fillmask    {"tokens": [...], "index": i, "top_k": n} -> {"tokens": [...], "logits": [...]}
 *   POST /v1/perplexity  {"texts": [...]}                          -> {"ppls": [...]}
 *
 * Malformed input answers 400 with {"error": ...}; a slot with no loaded
 * model answers 503.  Responses align index-for-index with the request
 * arrays and are deterministic for fixed model weights.
 */

import express, { Express, Request, Response } from "express";
import { z } from "zod";

import { ProviderSet } from "./providers";
import { tokenize } from "./tokens";

const textsSchema = z.object({ texts: z.array(z.string()) });
const fillmaskSchema = z.object({
  tokens: z.array(z.string()).min(1),
  index: z.number().int().min(0),
  top_k: z.number().int().min(1).default(64),
});

class BadRequest extends Error {}
class Unavailable extends Error {}

function parseTexts(body: unknown, maxBatch: number): string[][] {
  const parsed = textsSchema.safeParse(body);
  if (!parsed.success) {
    throw new BadRequest("'texts' must be an array of strings");
  }
  if (parsed.data.texts.length > maxBatch) {
    throw new BadRequest(`batch of ${parsed.data.texts.length} exceeds max ${maxBatch}`);
  }
  return parsed.data.texts.map((text, i) => {
    const tokens = tokenize(text);
    if (tokens.length === 0) {
      throw new BadRequest(`texts[${i}] has no tokens`);
    }
    return tokens;
  });
}

export function createApp(providers: ProviderSet, maxBatch = 256): Express {
  const app = express();
  app.use(express.json({ limit: "8mb" }));

  const guard = (handler: (req: Request, res: Response) => void) => {
    return (req: Request, res: Response) => {
      try {
        handler(req, res);
      } catch (err) {
        if (err instanceof BadRequest) {
          res.status(400).json({ error: err.message });
        } else if (err instanceof Unavailable) {
          res.status(503).json({ error: err.message });
        } else {
          res.status(500).json({ error: String(err) });
        }
      }
    };
  };

  app.get("/health", (_req, res) => {
    res.json({ status: "ok", models: providers.ids });
  });

  app.post(
    "/v1/predict",
    guard((req, res) => {
      if (!providers.classifier) {
        throw new Unavailable(`classifier model unavailable: ${providers.ids.classifier}`);
      }
      const sentences = parseTexts(req.body, maxBatch);
      res.json({ probs: providers.classifier.predict(sentences) });
    })
  );

  app.post(
    "/v1/fillmask",
    guard((req, res) => {
      if (!providers.fillmask) {
        throw new Unavailable(`fill-mask model unavailable: ${providers.ids.fillmask}`);
      }
      const parsed = fillmaskSchema.safeParse(req.body);
      if (!parsed.success) {
        throw new BadRequest("need 'tokens' (nonempty strings), 'index', positive 'top_k'");
      }
      const { tokens, index, top_k } = parsed.data;
      if (index >= tokens.length) {
        throw new BadRequest(`index ${index} out of range for ${tokens.length} tokens`);
      }
      const lowered = tokens.map((t) => t.toLowerCase());
      res.json(providers.fillmask.fill(lowered, index, top_k));
    })
  );

  app.post(
    "/v1/perplexity",
    guard((req, res) => {
      if (!providers.perplexity) {
        throw new Unavailable(`perplexity model unavailable: ${providers.ids.perplexity}`);
      }
      const sentences = parseTexts(req.body, maxBatch);
      res.json({ ppls: sentences.map((s) => providers.perplexity!.perplexity(s)) });
    })
  );

  // unreadable JSON bodies surface here
  app.use((err: Error, _req: Request, res: Response, next: (e?: Error) => void) => {
    if (res.headersSent) {
      return next(err);
    }
    res.status(400).json({ error: "malformed JSON body" });
  });

  return app;
}
