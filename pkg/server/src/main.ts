import { createApp } from "./app";
import { configFromEnv } from "./config";
import { buildProviders } from "./providers";

const config = configFromEnv();
const app = createApp(buildProviders(config), config.maxBatch);

app.listen(config.port, "127.0.0.1", () => {
  console.log(
    `model server listening on http://127.0.0.1:${config.port} ` +
      `(classifier=${config.classifier} fillmask=${config.fillmask} ppl=${config.perplexity})`
  );
});
