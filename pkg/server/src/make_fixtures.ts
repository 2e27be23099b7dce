/**
 * Regenerate the golden protocol fixtures by querying a live server instance.
 *
 * Run `npm run build && npm run make-fixtures` only when the builtin models
 * intentionally change; the committed fixtures pin the wire behavior.
 */

import { AddressInfo } from "net";
import { writeFileSync } from "fs";
import { join } from "path";

import { createApp } from "./app";
import { configFromEnv } from "./config";
import { buildProviders } from "./providers";

interface Fixture {
  name: string;
  path: string;
  request: unknown;
  status: number;
  response?: unknown;
}

const REQUESTS: Array<Pick<Fixture, "name" | "path" | "request">> = [
  {
    name: "predict-batch",
    path: "/v1/predict",
    request: {
      texts: [
        "a deep and meaningful film .",
        "a truly bad film with no heart .",
        "the deep story is a film gem .",
      ],
    },
  },
  {
    name: "predict-empty-batch",
    path: "/v1/predict",
    request: { texts: [] },
  },
  {
    name: "predict-uppercase-normalized",
    path: "/v1/predict",
    request: { texts: ["A DEEP and Meaningful FILM ."] },
  },
  {
    name: "fillmask-middle",
    path: "/v1/fillmask",
    request: {
      tokens: ["a", "deep", "and", "meaningful", "film", "."],
      index: 3,
      top_k: 5,
    },
  },
  {
    name: "fillmask-top-k-one",
    path: "/v1/fillmask",
    request: { tokens: ["the", "film", "is", "moving", "."], index: 1, top_k: 1 },
  },
  {
    name: "fillmask-single-token-unigram",
    path: "/v1/fillmask",
    request: { tokens: ["film"], index: 0, top_k: 3 },
  },
  {
    name: "perplexity-pair",
    path: "/v1/perplexity",
    request: { texts: ["a deep and moving film .", "film bad the a no ."] },
  },
  {
    name: "predict-malformed-texts",
    path: "/v1/predict",
    request: { texts: "not-a-list" },
  },
  {
    name: "predict-empty-text",
    path: "/v1/predict",
    request: { texts: ["   "] },
  },
  {
    name: "fillmask-index-out-of-range",
    path: "/v1/fillmask",
    request: { tokens: ["a", "b"], index: 7, top_k: 5 },
  },
  {
    name: "fillmask-bad-top-k",
    path: "/v1/fillmask",
    request: { tokens: ["a", "b"], index: 0, top_k: 0 },
  },
];

async function main(): Promise<void> {
  const config = configFromEnv({});
  const app = createApp(buildProviders(config), config.maxBatch);
  const server = app.listen(0, "127.0.0.1");
  await new Promise<void>((resolve) => server.once("listening", resolve));
  const { port } = server.address() as AddressInfo;

  const fixtures: Fixture[] = [];
  for (const { name, path, request } of REQUESTS) {
    const resp = await fetch(`http://127.0.0.1:${port}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
    const body = await resp.json();
    fixtures.push({
      name,
      path,
      request,
      status: resp.status,
      ...(resp.status === 200 ? { response: body } : {}),
    });
  }
  server.close();

  const out = join(__dirname, "..", "test", "fixtures.json");
  writeFileSync(out, JSON.stringify(fixtures, null, 2) + "\n");
  console.log(`wrote ${fixtures.length} fixtures to ${out}`);
}

main().catch((err) => {
  console.error(err);
  process.exit(1);
});
