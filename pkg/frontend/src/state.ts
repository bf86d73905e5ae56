/** Client-side view state, driven entirely by server messages.
 *
 * The workbench holds no image semantics: `reduce` is a pure function of
 * (state, server message), so replaying a recorded message stream from the
 * initial state reproduces the live view exactly — that property is what
 * the convergence tests snapshot.
 */

import type { FormSpec, ServerMessage } from "./protocol";

export interface ComponentSet {
  symbols: number[];
  names: (string | null)[];
  states: string[];
}

export interface WorkbenchState {
  /** Last pushed spec per form symbol. */
  forms: Record<number, FormSpec>;
  /** Last pushed result set per component symbol. */
  sets: Record<number, ComponentSet>;
  /** Server-echoed selection per component symbol. */
  selections: Record<number, number>;
  /** Last committed image version the server announced. */
  version: number | null;
  /** Last "action can not be performed" notice, if any. */
  notice: string | null;
  /** Last protocol/evaluation error, if any. */
  error: { code: string; text: string } | null;
}

export const initial: WorkbenchState = {
  forms: {},
  sets: {},
  selections: {},
  version: null,
  notice: null,
  error: null,
};

/** Every component symbol appearing in a spec tree. */
export function specSymbols(spec: FormSpec): number[] {
  const out: number[] = [];
  const walk = (node: FormSpec): void => {
    out.push(node.symbol);
    node.children.forEach(walk);
  };
  walk(spec);
  return out;
}

export function reduce(state: WorkbenchState, msg: ServerMessage): WorkbenchState {
  switch (msg.type) {
    case "FormSpecPush": {
      const forms = { ...state.forms, [msg.form]: msg.spec };
      const previous = state.forms[msg.form];
      let sets = state.sets;
      let selections = state.selections;
      if (previous !== undefined) {
        // a re-render drops components that vanished from the form
        const kept = new Set(specSymbols(msg.spec));
        const gone = specSymbols(previous).filter((s) => !kept.has(s));
        if (gone.length > 0) {
          sets = { ...sets };
          selections = { ...selections };
          for (const s of gone) {
            delete sets[s];
            delete selections[s];
          }
        }
      }
      return { ...state, forms, sets, selections };
    }
    case "SetUpdate": {
      const entry: ComponentSet = {
        symbols: [...msg.symbols],
        names: [...msg.names],
        states: [...msg.states],
      };
      return { ...state, sets: { ...state.sets, [msg.component]: entry } };
    }
    case "SelectionEcho":
      return {
        ...state,
        selections: { ...state.selections, [msg.component]: msg.symbol },
      };
    case "ActionAborted":
      return { ...state, notice: msg.reason };
    case "CommitNotice":
      return { ...state, version: msg.version };
    case "Error":
      return { ...state, error: { code: msg.code, text: msg.text } };
  }
}

/** Deterministic JSON: object keys sorted, so equal values stringify equally. */
export function canonical(value: unknown): string {
  if (Array.isArray(value)) {
    return "[" + value.map(canonical).join(",") + "]";
  }
  if (value !== null && typeof value === "object") {
    const rec = value as Record<string, unknown>;
    const body = Object.keys(rec)
      .sort()
      .map((k) => JSON.stringify(k) + ":" + canonical(rec[k]));
    return "{" + body.join(",") + "}";
  }
  return JSON.stringify(value ?? null);
}

/** The whole client state, canonically serialized (replay comparisons). */
export function snapshot(state: WorkbenchState): string {
  return canonical(state);
}

/** The part of the state every connected client must agree on: what the
 * server pushed, not per-session echoes or notices. */
export function sharedView(state: WorkbenchState): string {
  return canonical({ forms: state.forms, sets: state.sets, version: state.version });
}
