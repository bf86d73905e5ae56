/** The kernel's wire messages as they ride the web-socket gateway.
 *
 * One JSON object per web-socket message; every object carries "v": 1 and
 * a "type" tag, and symbol ids travel as plain integers. The workbench
 * only ever decodes server messages and encodes client messages — it never
 * looks inside the image.
 */

export const VERSION = 1;

export type PropertyValue = string | number | boolean;

/** A rendered component tree as pushed by the server. */
export interface FormSpec {
  symbol: number;
  kind: string;
  name: string | null;
  properties: Record<string, PropertyValue>;
  events: Record<string, { handler: number; label: string | null }>;
  feeds: number[];
  children: FormSpec[];
}

export type ClientMessage =
  | { type: "Login"; user: string }
  | { type: "Logout" }
  | { type: "Select"; component: number; symbol: number }
  | { type: "Click"; component: number }
  | { type: "DbClick"; component: number }
  | { type: "ParseText"; text: string }
  | { type: "DeleteUtterance"; symbol: number }
  | { type: "DesignerOp"; op: string; args: Record<string, unknown> }
  | { type: "OpenForm"; form: number };

export type ServerMessage =
  | { type: "FormSpecPush"; form: number; spec: FormSpec }
  | {
      type: "SetUpdate";
      component: number;
      symbols: number[];
      names: (string | null)[];
      states: string[];
    }
  | { type: "SelectionEcho"; component: number; symbol: number }
  | { type: "ActionAborted"; reason: string }
  | { type: "CommitNotice"; version: number }
  | { type: "Error"; code: string; text: string };

export class MalformedMessage extends Error {}

export function encode(msg: ClientMessage): string {
  return JSON.stringify({ v: VERSION, ...msg });
}

const SERVER_FIELDS: Record<string, Record<string, "number" | "string" | "object">> = {
  FormSpecPush: { form: "number", spec: "object" },
  SetUpdate: { component: "number", symbols: "object", names: "object", states: "object" },
  SelectionEcho: { component: "number", symbol: "number" },
  ActionAborted: { reason: "string" },
  CommitNotice: { version: "number" },
  Error: { code: "string", text: "string" },
};

export function decode(raw: string): ServerMessage {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    throw new MalformedMessage("not JSON");
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new MalformedMessage("not an object");
  }
  const rec = obj as Record<string, unknown>;
  if (rec.v !== VERSION) {
    throw new MalformedMessage(`unknown protocol version ${String(rec.v)}`);
  }
  const type = rec.type;
  if (typeof type !== "string" || !(type in SERVER_FIELDS)) {
    throw new MalformedMessage(`unknown server message ${String(type)}`);
  }
  const fields = SERVER_FIELDS[type]!;
  for (const [name, kind] of Object.entries(fields)) {
    const value = rec[name];
    if (value === undefined || (kind !== "object" && typeof value !== kind)) {
      throw new MalformedMessage(`${type}.${name} is missing or mistyped`);
    }
  }
  const { v: _v, ...msg } = rec;
  return msg as unknown as ServerMessage;
}
