/** Protocol conformance for the model server. */

import { AddressInfo } from "net";
import { Server } from "http";
import { readFileSync } from "fs";
import { join } from "path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { createApp } from "../src/app";
import { configFromEnv } from "../src/config";
import { buildProviders } from "../src/providers";

interface Fixture {
  name: string;
  path: string;
  request: unknown;
  status: number;
  response?: unknown;
}

let server: Server;
let base: string;

async function post(path: string, body: unknown): Promise<Response> {
  return fetch(base + path, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
}

beforeAll(async () => {
  const config = configFromEnv({});
  server = createApp(buildProviders(config), config.maxBatch).listen(0, "127.0.0.1");
  await new Promise<void>((resolve) => server.once("listening", resolve));
  base = `http://127.0.0.1:${(server.address() as AddressInfo).port}`;
});

afterAll(() => {
  server.close();
});

describe("golden fixtures", () => {
  const fixtures: Fixture[] = JSON.parse(
    readFileSync(join(__dirname, "fixtures.json"), "utf-8")
  );

  it("has fixtures to replay", () => {
    expect(fixtures.length).toBeGreaterThan(5);
  });

  for (const fixture of JSON.parse(
    readFileSync(join(__dirname, "fixtures.json"), "utf-8")
  ) as Fixture[]) {
    it(`round-trips ${fixture.name}`, async () => {
      const resp = await post(fixture.path, fixture.request);
      expect(resp.status).toBe(fixture.status);
      const body = await resp.json();
      if (fixture.status === 200) {
        expect(body).toEqual(fixture.response);
      } else {
        expect(body).toHaveProperty("error");
      }
    });
  }
});

describe("protocol contracts", () => {
  it("health reports the configured models", async () => {
    const resp = await fetch(`${base}/health`);
    expect(resp.status).toBe(200);
    const body = await resp.json();
    expect(body.status).toBe("ok");
    expect(body.models.classifier).toBe("builtin:lexicon");
  });

  it("keeps response order aligned with the request batch", async () => {
    const texts = [
      "a deep and meaningful film .",
      "a truly bad film .",
      "the movie is a gem .",
      "this story is a mess .",
    ];
    const batch = (await (await post("/v1/predict", { texts })).json()).probs;
    const singles: number[] = [];
    for (const text of texts) {
      singles.push((await (await post("/v1/predict", { texts: [text] })).json()).probs[0]);
    }
    expect(batch).toEqual(singles);
  });

  it("answers identical requests identically", async () => {
    const request = {
      tokens: ["a", "deep", "and", "meaningful", "film", "."],
      index: 1,
      top_k: 10,
    };
    const first = await (await post("/v1/fillmask", request)).json();
    const second = await (await post("/v1/fillmask", request)).json();
    expect(second).toEqual(first);
  });

  it("sorts fill-mask logits nonincreasing and respects top_k", async () => {
    const body = await (
      await post("/v1/fillmask", {
        tokens: ["a", "deep", "and", "meaningful", "film", "."],
        index: 1,
        top_k: 4,
      })
    ).json();
    expect(body.tokens.length).toBe(body.logits.length);
    expect(body.tokens.length).toBeLessThanOrEqual(4);
    const sorted = [...body.logits].sort((a, b) => b - a);
    expect(body.logits).toEqual(sorted);
  });

  it("proposes whole tokens only", async () => {
    const body = await (
      await post("/v1/fillmask", {
        tokens: ["the", "film", "is", "moving", "."],
        index: 3,
        top_k: 50,
      })
    ).json();
    for (const token of body.tokens) {
      expect(token).toMatch(/^\S+$/);
    }
  });

  it("rejects oversized batches", async () => {
    const texts = Array.from({ length: 1000 }, () => "a film .");
    const resp = await post("/v1/predict", { texts });
    expect(resp.status).toBe(400);
  });

  it("rejects unreadable JSON with 400", async () => {
    const resp = await fetch(`${base}/v1/predict`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: "{nope",
    });
    expect(resp.status).toBe(400);
  });

  it("ranks a fluent sentence below a scrambled one", async () => {
    const body = await (
      await post("/v1/perplexity", {
        texts: ["a deep and moving film .", "film moving and deep a ."],
      })
    ).json();
    expect(body.ppls[0]).toBeLessThan(body.ppls[1]);
  });
});

describe("unavailable models", () => {
  it("answers 503 for slots without a loaded model", async () => {
    const providers = buildProviders({
      classifier: "hf:some-finetuned-bert",
      fillmask: "builtin:bigram",
      perplexity: "builtin:bigram",
      port: 0,
      maxBatch: 16,
      device: "cpu",
    });
    const lame = createApp(providers, 16).listen(0, "127.0.0.1");
    await new Promise<void>((resolve) => lame.once("listening", resolve));
    const port = (lame.address() as AddressInfo).port;
    const resp = await fetch(`http://127.0.0.1:${port}/v1/predict`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ texts: ["a film ."] }),
    });
    expect(resp.status).toBe(503);
    expect(await resp.json()).toHaveProperty("error");
    lame.close();
  });
});
