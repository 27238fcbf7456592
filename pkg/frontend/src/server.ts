// Console server: serves the browser client and a WebSocket push channel.
//
// The engine is driven exclusively through its CLI: every injected step is
// appended to a session script which is re-run with
// `dualvoice session run <script> --events <log> --loose`. Replays are
// deterministic, so the regenerated event log is the session's full
// history; clients always receive it as a whole snapshot, which makes
// reconnect resync trivial.

import { execFile } from "node:child_process";
import { mkdtemp, readFile, writeFile } from "node:fs/promises";
import { createServer, Server } from "node:http";
import { tmpdir } from "node:os";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { promisify } from "node:util";

import express from "express";
import { WebSocket, WebSocketServer } from "ws";

import { ConsoleEvent, parseEventLog } from "./state.js";

const execFileAsync = promisify(execFile);

export interface StepSpec {
  mode: "normal" | "whisper";
  text: string;
  reported?: string;
  alternatives?: string[];
}

export interface ConsoleServerOptions {
  modelPath: string;
  port?: number; // 0 picks an ephemeral port
  cli?: string; // dualvoice executable
  seed?: number;
}

export interface ConsoleServer {
  port: number;
  injectStep(step: StepSpec): Promise<ConsoleEvent[]>;
  reset(): Promise<void>;
  events(): ConsoleEvent[];
  close(): Promise<void>;
}

function isValidStep(value: unknown): value is StepSpec {
  if (typeof value !== "object" || value === null) return false;
  const step = value as Record<string, unknown>;
  return (
    (step.mode === "normal" || step.mode === "whisper") &&
    typeof step.text === "string" &&
    step.text.length > 0
  );
}

export async function createConsoleServer(
  options: ConsoleServerOptions,
): Promise<ConsoleServer> {
  const cli = options.cli ?? "dualvoice";
  const seed = options.seed ?? 0;
  const workdir = await mkdtemp(path.join(tmpdir(), "dualvoice-console-"));

  const steps: StepSpec[] = [];
  let log: ConsoleEvent[] = [];

  async function runSession(): Promise<void> {
    if (steps.length === 0) {
      log = [];
      return;
    }
    const scriptPath = path.join(workdir, "session.json");
    const eventsPath = path.join(workdir, "events.jsonl");
    const script = { seed, steps, expected: "" };
    await writeFile(scriptPath, JSON.stringify(script), "utf-8");
    await execFileAsync(cli, [
      "session",
      "run",
      scriptPath,
      "--model",
      options.modelPath,
      "--events",
      eventsPath,
      "--loose",
    ]);
    log = parseEventLog(await readFile(eventsPath, "utf-8"));
  }

  const app = express();
  const here = path.dirname(fileURLToPath(import.meta.url));
  app.use(express.static(path.join(here, "..", "public")));
  app.use("/dist", express.static(here));

  const httpServer: Server = createServer(app);
  const wss = new WebSocketServer({ server: httpServer });

  function snapshotMessage(): string {
    return JSON.stringify({ type: "snapshot", events: log });
  }

  function broadcast(): void {
    const message = snapshotMessage();
    for (const client of wss.clients) {
      if (client.readyState === WebSocket.OPEN) {
        client.send(message);
      }
    }
  }

  wss.on("connection", (socket) => {
    socket.send(snapshotMessage()); // full-snapshot resync on (re)connect
    socket.on("message", (raw) => {
      void (async () => {
        let message: Record<string, unknown>;
        try {
          message = JSON.parse(String(raw));
        } catch {
          socket.send(JSON.stringify({ type: "error", message: "bad JSON" }));
          return;
        }
        try {
          if (message.type === "inject_step" && isValidStep(message.step)) {
            steps.push(message.step);
            await runSession();
            broadcast();
          } else if (message.type === "reset") {
            steps.length = 0;
            log = [];
            broadcast();
          } else {
            socket.send(
              JSON.stringify({ type: "error", message: "unknown message" }),
            );
          }
        } catch (err) {
          socket.send(JSON.stringify({ type: "error", message: String(err) }));
        }
      })();
    });
  });

  await new Promise<void>((resolve) =>
    httpServer.listen(options.port ?? 0, "127.0.0.1", resolve),
  );
  const address = httpServer.address();
  const port = typeof address === "object" && address ? address.port : 0;

  return {
    port,
    events: () => log,
    async injectStep(step: StepSpec) {
      steps.push(step);
      await runSession();
      broadcast();
      return log;
    },
    async reset() {
      steps.length = 0;
      log = [];
      broadcast();
    },
    async close() {
      for (const client of wss.clients) client.terminate();
      await new Promise<void>((resolve, reject) =>
        httpServer.close((err) => (err ? reject(err) : resolve())),
      );
    },
  };
}
