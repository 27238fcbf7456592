// Entry point: `node dist/main.js --model path/to/model.dvm [--port 8787]`

import { createConsoleServer } from "./server.js";

function argValue(flag: string): string | undefined {
  const index = process.argv.indexOf(flag);
  return index >= 0 ? process.argv[index + 1] : undefined;
}

const modelPath = argValue("--model") ?? process.env.DUALVOICE_MODEL;
if (!modelPath) {
  console.error("usage: node dist/main.js --model <model.dvm> [--port 8787]");
  process.exit(1);
}

const port = Number(argValue("--port") ?? process.env.PORT ?? 8787);
const cli = process.env.DUALVOICE_CLI ?? "dualvoice";

const server = await createConsoleServer({ modelPath, port, cli });
console.log(`dualvoice console listening on http://127.0.0.1:${server.port}`);
