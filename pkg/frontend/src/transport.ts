/**
 * WebSocket transport binding for a viewer session.
 *
 * Works with any socket exposing the browser WebSocket surface (the `ws`
 * package in Node matches it), so tests and the browser share this code.
 */

import { ProtocolError, parseServerMessage } from "./protocol.js";
import { Transport, ViewerSession } from "./state.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(type: "open" | "message" | "close" | "error", cb: (ev: any) => void): void;
}

export function bindSocket(socket: SocketLike, makeSession: (t: Transport) => ViewerSession): Promise<ViewerSession> {
  const transport: Transport = {
    send: (data) => socket.send(data),
    close: () => socket.close(),
  };
  const session = makeSession(transport);
  return new Promise((resolve, reject) => {
    let opened = false;
    socket.addEventListener("open", () => {
      opened = true;
      session.start();
      resolve(session);
    });
    socket.addEventListener("message", (ev: { data: unknown }) => {
      const raw = typeof ev.data === "string" ? ev.data : String(ev.data);
      try {
        session.handleMessage(parseServerMessage(raw));
      } catch (err) {
        if (err instanceof ProtocolError) {
          // keep the last good panel state; surface the problem out of band
          console.warn("dropped malformed message:", err.message);
        } else {
          throw err;
        }
      }
    });
    socket.addEventListener("close", () => {
      session.handleDisconnect();
      if (!opened) {
        reject(new Error("connection closed before it opened"));
      }
    });
    socket.addEventListener("error", () => {
      session.handleDisconnect();
      if (!opened) {
        reject(new Error("could not reach the server"));
      }
    });
  });
}
