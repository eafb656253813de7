/**
 * Streaming classification service.
 *
 * Protocol: newline-delimited UTF-8 JSON. Requests are {"id", "text"};
 * responses are {"id", "label", "score"} in completion order. A line the
 * service cannot handle yields an {"id"?, "error"} record and the stream
 * keeps going. Transports: stdin/stdout, or a local TCP socket.
 */
import { createInterface } from "node:readline";
import { createServer } from "node:net";
import type { Readable, Writable } from "node:stream";
import { Artifact, predictWithArtifact } from "./artifact.js";

export function handleLine(artifact: Artifact, line: string): string {
  const trimmed = line.trim();
  if (!trimmed) return "";
  let doc: unknown;
  try {
    doc = JSON.parse(trimmed);
  } catch {
    return JSON.stringify({ error: "invalid JSON request line" });
  }
  const request = doc as { id?: unknown; text?: unknown };
  const id = typeof request.id === "number" ? request.id : undefined;
  if (id === undefined || typeof request.text !== "string" || !request.text) {
    return JSON.stringify({
      ...(id !== undefined ? { id } : {}),
      error: "request must carry a numeric id and a non-empty text",
    });
  }
  const { label, score } = predictWithArtifact(artifact, request.text);
  return JSON.stringify({ id, label, score: round6(score) });
}

function round6(x: number): number {
  return Math.round(x * 1e6) / 1e6;
}

export function serveStream(
  artifact: Artifact,
  input: Readable,
  output: Writable,
): Promise<void> {
  return new Promise((resolve) => {
    const rl = createInterface({ input, terminal: false });
    rl.on("line", (line) => {
      const response = handleLine(artifact, line);
      if (response) output.write(response + "\n");
    });
    rl.on("close", () => resolve());
  });
}

export function serveSocket(
  artifact: Artifact,
  host: string,
  port: number,
): { close: () => void; ready: Promise<number> } {
  const server = createServer((conn) => {
    void serveStream(artifact, conn, conn);
  });
  const ready = new Promise<number>((resolve, reject) => {
    server.once("error", reject);
    server.listen(port, host, () => {
      const address = server.address();
      resolve(typeof address === "object" && address ? address.port : port);
    });
  });
  return { close: () => server.close(), ready };
}
