import { WebSocket } from "ws";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ConsoleServer, createConsoleServer } from "../src/server.js";
import { ConsoleEvent, replay } from "../src/state.js";
import { ensureModel } from "./helpers.js";

interface SnapshotMessage {
  type: string;
  events?: ConsoleEvent[];
  message?: string;
}

function connectAndCollect(port: number) {
  const socket = new WebSocket(`ws://127.0.0.1:${port}/`);
  const queue: SnapshotMessage[] = [];
  const waiters: ((m: SnapshotMessage) => void)[] = [];
  socket.on("message", (raw) => {
    const message = JSON.parse(String(raw)) as SnapshotMessage;
    const waiter = waiters.shift();
    if (waiter) waiter(message);
    else queue.push(message);
  });
  const next = () =>
    new Promise<SnapshotMessage>((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("timed out waiting for message")), 30_000);
      const deliver = (m: SnapshotMessage) => {
        clearTimeout(timer);
        resolve(m);
      };
      const queued = queue.shift();
      if (queued) deliver(queued);
      else waiters.push(deliver);
    });
  const opened = new Promise<void>((resolve) => socket.on("open", () => resolve()));
  return { socket, next, opened };
}

describe("console server", () => {
  let server: ConsoleServer;

  beforeAll(async () => {
    const modelPath = await ensureModel();
    server = await createConsoleServer({ modelPath, port: 0 });
  }, 120_000);

  afterAll(async () => {
    await server.close();
  });

  it("sends an initial snapshot and applies injected steps", async () => {
    const client = connectAndCollect(server.port);
    await client.opened;
    const hello = await client.next();
    expect(hello.type).toBe("snapshot");
    expect(hello.events).toEqual([]);

    client.socket.send(
      JSON.stringify({
        type: "inject_step",
        step: { mode: "normal", text: "hello" },
      }),
    );
    const snapshot = await client.next();
    expect(snapshot.type).toBe("snapshot");
    const state = replay(snapshot.events!);
    expect(state.document).toBe("hello");
    expect(state.timeline.length).toBeGreaterThan(0);
    client.socket.close();
  }, 60_000);

  it("menu flow round-trips: inject menu then two applies candidate 2", async () => {
    await server.reset();
    const client = connectAndCollect(server.port);
    await client.opened;
    await client.next(); // initial snapshot

    const inject = async (step: Record<string, unknown>) => {
      client.socket.send(JSON.stringify({ type: "inject_step", step }));
      return client.next();
    };

    await inject({
      mode: "normal",
      text: "hello world is fun",
      reported: "hello word is fun",
      alternatives: ["hello word is fun", "hello world is fun"],
    });
    const afterMenu = await inject({ mode: "whisper", text: "menu" });
    const menuState = replay(afterMenu.events!);
    expect(menuState.menu).toEqual(["hello word is fun", "hello world is fun"]);
    expect(menuState.document).toBe("hello word is fun");

    const afterSelect = await inject({ mode: "whisper", text: "two" });
    const finalState = replay(afterSelect.events!);
    expect(finalState.document).toBe("hello world is fun"); // candidate 2 applied
    expect(finalState.menu).toBeNull();
    client.socket.close();
  }, 120_000);

  it("resyncs a reconnecting client with the full snapshot", async () => {
    const late = connectAndCollect(server.port);
    await late.opened;
    const snapshot = await late.next();
    expect(snapshot.type).toBe("snapshot");
    const state = replay(snapshot.events!);
    expect(state.document).toBe("hello world is fun");
    late.socket.close();
  }, 60_000);

  it("rejects malformed messages without dying", async () => {
    const client = connectAndCollect(server.port);
    await client.opened;
    await client.next();
    client.socket.send("not json");
    const reply = await client.next();
    expect(reply.type).toBe("error");
    client.socket.send(JSON.stringify({ type: "inject_step", step: { mode: "hum" } }));
    const reply2 = await client.next();
    expect(reply2.type).toBe("error");
    client.socket.close();
  }, 60_000);
});
