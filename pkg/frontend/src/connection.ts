/** One web-socket session against the kernel.
 *
 * The connection decodes every incoming message, folds it into the view
 * state and keeps the raw stream around so tests can replay it. Browser
 * WebSocket and the node "ws" client expose the same event surface, so
 * either can be passed in.
 */

import { ClientMessage, ServerMessage, decode, encode } from "./protocol";
import { WorkbenchState, initial, reduce } from "./state";

export interface Socket {
  send(data: string): void;
  close(): void;
  // the loosest common surface of the browser WebSocket and node's "ws"
  addEventListener(type: string, listener: (event: any) => void): void;
}

type Listener = (state: WorkbenchState) => void;

export class Connection {
  state: WorkbenchState = initial;
  /** Every decoded server message, in arrival order. */
  readonly received: ServerMessage[] = [];
  /** How many client messages went out, the login included. */
  sent = 0;

  private readonly listeners = new Set<Listener>();
  private readonly opened: Promise<void>;

  constructor(private readonly sock: Socket) {
    this.opened = new Promise((resolve, reject) => {
      sock.addEventListener("open", () => resolve());
      sock.addEventListener("error", (event: { message?: string }) =>
        reject(new Error(event.message ?? "web-socket error")),
      );
    });
    this.opened.catch(() => undefined); // surfaced via login(), not unhandled
    sock.addEventListener("message", (event: { data: unknown }) => {
      this.accept(decode(String(event.data)));
    });
  }

  private accept(msg: ServerMessage): void {
    this.received.push(msg);
    this.state = reduce(this.state, msg);
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  onChange(listener: Listener): void {
    this.listeners.add(listener);
  }

  async login(user: string): Promise<void> {
    await this.opened;
    this.send({ type: "Login", user });
  }

  send(msg: ClientMessage): void {
    this.sent += 1;
    this.sock.send(encode(msg));
  }

  /** Resolves once the state satisfies the predicate (checked immediately
   * and after every message). */
  waitFor(
    predicate: (state: WorkbenchState) => boolean,
    timeoutMs = 15_000,
    label = "condition",
  ): Promise<WorkbenchState> {
    if (predicate(this.state)) {
      return Promise.resolve(this.state);
    }
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        this.listeners.delete(check);
        reject(
          new Error(
            `timed out waiting for ${label}; ` +
              `version=${String(this.state.version)} ` +
              `received=${this.received.length}`,
          ),
        );
      }, timeoutMs);
      const check: Listener = (state) => {
        if (predicate(state)) {
          clearTimeout(timer);
          this.listeners.delete(check);
          resolve(state);
        }
      };
      this.listeners.add(check);
    });
  }

  close(): void {
    this.sock.close();
  }
}
