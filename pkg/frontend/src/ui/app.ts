/** The workbench page: live forms, the parse editor and the form designer.
 *
 * Everything visible is a projection of the connection's state; the panes
 * re-render on every server message. The only view-local choices are which
 * form the designer shows and which component is highlighted in it —
 * neither touches image semantics.
 */

import type { Connection } from "../connection";
import type { FormSpec, PropertyValue } from "../protocol";
import type { WorkbenchState } from "../state";
import { el } from "./dom";

const CONTAINERS = new Set(["Form", "Panel", "TabSheet"]);

export class App {
  private readonly doc: Document;
  private statusBox!: HTMLElement;
  private noticeBox!: HTMLElement;
  private formsPane!: HTMLElement;
  private formPicker!: HTMLSelectElement;
  private designTree!: HTMLElement;
  private parseInput!: HTMLTextAreaElement;
  private deleteInput!: HTMLInputElement;
  private kindInput!: HTMLInputElement;
  private nameInput!: HTMLInputElement;
  private propInput!: HTMLInputElement;
  private valueInput!: HTMLInputElement;
  private eventInput!: HTMLInputElement;
  private handlerInput!: HTMLInputElement;

  /** Designer focus: the shown form and the highlighted component. */
  private designerForm: number | null = null;
  private designerSel: number | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly conn: Connection,
  ) {
    this.doc = root.ownerDocument;
    this.buildShell();
    conn.onChange((state) => this.update(state));
    this.update(conn.state);
  }

  // ── static chrome ──────────────────────────────────────────────────────────

  private buildShell(): void {
    const d = this.doc;
    this.statusBox = el(d, "span", { className: "status", text: "connecting…" });
    this.noticeBox = el(d, "span", { className: "notice" });
    this.formsPane = el(d, "div", { className: "forms" });
    this.designTree = el(d, "div", { className: "design-tree" });
    this.formPicker = el(d, "select", {
      className: "form-picker",
      onChange: () => {
        this.designerForm = Number(this.formPicker.value);
        this.designerSel = null;
        this.update(this.conn.state);
      },
    });
    this.parseInput = el(d, "textarea", {
      className: "parse-input",
      placeholder: "New utterances, one or more sentences…",
    });
    this.deleteInput = el(d, "input", {
      className: "delete-input",
      placeholder: "utterance #",
    });
    this.kindInput = el(d, "input", { className: "kind-input", placeholder: "kind (Button…)" });
    this.nameInput = el(d, "input", { className: "name-input", placeholder: "name" });
    this.propInput = el(d, "input", { className: "prop-input", placeholder: "property" });
    this.valueInput = el(d, "input", { className: "value-input", placeholder: "value" });
    this.eventInput = el(d, "input", { className: "event-input", placeholder: "event (OnClick…)" });
    this.handlerInput = el(d, "input", { className: "handler-input", placeholder: "handler #" });

    const parsePane = el(
      d,
      "section",
      { className: "pane pane-parse" },
      el(d, "h2", { text: "Parse editor" }),
      this.parseInput,
      el(d, "div", {}, el(d, "button", {
        className: "parse-go",
        text: "Parse",
        onClick: () => {
          const text = this.parseInput.value.trim();
          if (text) this.conn.send({ type: "ParseText", text });
        },
      })),
      el(d, "div", {}, this.deleteInput, el(d, "button", {
        className: "delete-go",
        text: "Delete utterance",
        onClick: () => {
          const symbol = Number(this.deleteInput.value);
          if (Number.isInteger(symbol)) {
            this.conn.send({ type: "DeleteUtterance", symbol });
          }
        },
      })),
    );

    const designPane = el(
      d,
      "section",
      { className: "pane pane-design" },
      el(d, "h2", { text: "Form designer" }),
      this.formPicker,
      this.designTree,
      el(d, "div", {}, this.kindInput, this.nameInput, el(d, "button", {
        className: "add-go",
        text: "Add into selected",
        onClick: () => this.addComponent(),
      })),
      el(d, "div", {}, el(d, "button", {
        className: "remove-go",
        text: "Remove selected",
        onClick: () => {
          if (this.designerSel !== null) {
            this.conn.send({
              type: "DesignerOp",
              op: "remove",
              args: { component: this.designerSel },
            });
          }
        },
      })),
      el(d, "div", {}, this.propInput, this.valueInput, el(d, "button", {
        className: "prop-go",
        text: "Set property",
        onClick: () => this.setProperty(),
      })),
      el(d, "div", {}, this.eventInput, this.handlerInput, el(d, "button", {
        className: "bind-go",
        text: "Bind event",
        onClick: () => this.bindEvent(),
      })),
    );

    this.root.append(
      el(d, "header", {}, el(d, "h1", { text: "panta workbench" }), this.statusBox, this.noticeBox),
      el(
        d,
        "main",
        {},
        parsePane,
        el(d, "section", { className: "pane pane-forms" }, el(d, "h2", { text: "Forms" }), this.formsPane),
        designPane,
      ),
    );
  }

  private addComponent(): void {
    const kind = this.kindInput.value.trim();
    const name = this.nameInput.value.trim();
    const parent = this.designerSel ?? this.designerForm;
    if (!kind || !name || parent === null) return;
    this.conn.send({
      type: "DesignerOp",
      op: "define",
      args: { kind, name, parent, props: {} },
    });
  }

  private setProperty(): void {
    const prop = this.propInput.value.trim();
    if (this.designerSel === null || !prop) return;
    this.conn.send({
      type: "DesignerOp",
      op: "set_property",
      args: {
        component: this.designerSel,
        property: prop,
        value: coerce(this.valueInput.value),
      },
    });
  }

  private bindEvent(): void {
    const event = this.eventInput.value.trim();
    const handler = Number(this.handlerInput.value);
    if (this.designerSel === null || !event || !Number.isInteger(handler)) return;
    this.conn.send({
      type: "DesignerOp",
      op: "bind_event",
      args: { component: this.designerSel, event, handler },
    });
  }

  // ── dynamic panes ──────────────────────────────────────────────────────────

  update(state: WorkbenchState): void {
    this.statusBox.textContent =
      state.version === null ? "no commits seen yet" : `image version ${state.version}`;
    this.noticeBox.textContent = state.error
      ? `${state.error.code}: ${state.error.text}`
      : state.notice ?? "";

    const formIds = Object.keys(state.forms).map(Number).sort((a, b) => a - b);
    if (this.designerForm === null || !(this.designerForm in state.forms)) {
      this.designerForm = formIds[0] ?? null;
    }
    if (this.designerSel !== null) {
      const shown = this.designerForm !== null ? state.forms[this.designerForm] : undefined;
      if (!shown || !hasSymbol(shown, this.designerSel)) this.designerSel = null;
    }

    this.formsPane.replaceChildren(
      ...formIds.map((id) => this.renderComponent(state.forms[id]!, state)),
    );
    this.renderPicker(formIds, state);
    const spec = this.designerForm !== null ? state.forms[this.designerForm] : undefined;
    this.designTree.replaceChildren(...(spec ? [this.renderDesignNode(spec)] : []));
  }

  private renderPicker(formIds: number[], state: WorkbenchState): void {
    const d = this.doc;
    this.formPicker.replaceChildren(
      ...formIds.map((id) => {
        const option = el(d, "option", {
          text: state.forms[id]!.name ?? `#${id}`,
          value: String(id),
        });
        option.selected = id === this.designerForm;
        return option;
      }),
    );
  }

  private renderComponent(spec: FormSpec, state: WorkbenchState): HTMLElement {
    const d = this.doc;
    const caption = spec.properties["Caption"];
    const label =
      `${spec.kind} ${spec.name ?? `#${spec.symbol}`}` +
      (caption !== undefined ? ` — ${String(caption)}` : "");

    if (spec.kind === "Button") {
      return el(d, "button", {
        className: "component kind-button",
        text: caption !== undefined ? String(caption) : spec.name ?? `#${spec.symbol}`,
        onClick: () => this.conn.send({ type: "Click", component: spec.symbol }),
        onDblClick: () => this.conn.send({ type: "DbClick", component: spec.symbol }),
      });
    }

    const box = el(
      d,
      "fieldset",
      { className: `component kind-${spec.kind.toLowerCase()}` },
      el(d, "legend", { text: label }),
    );
    if (spec.kind === "Editor") {
      box.append(el(d, "textarea", { className: "editor-body" }));
    }
    if (spec.kind === "Label") {
      box.append(el(d, "span", { text: caption !== undefined ? String(caption) : "" }));
    }
    const set = state.sets[spec.symbol];
    if (set) {
      const list = el(d, "ul", { className: "set" });
      set.symbols.forEach((symbol, i) => {
        const selected = state.selections[spec.symbol] === symbol;
        list.append(
          el(d, "li", {
            className: "item" + (selected ? " selected" : ""),
            text: set.names[i] ?? `#${symbol}`,
            title: `#${symbol} (${set.states[i] ?? ""})`,
            onClick: () => this.conn.send({ type: "Select", component: spec.symbol, symbol }),
            onDblClick: () => this.conn.send({ type: "DbClick", component: spec.symbol }),
          }),
        );
      });
      box.append(list);
    }
    for (const child of spec.children) {
      box.append(this.renderComponent(child, state));
    }
    return box;
  }

  private renderDesignNode(spec: FormSpec): HTMLElement {
    const d = this.doc;
    const events = Object.entries(spec.events)
      .map(([name, e]) => `${name}→${e.label ?? `#${e.handler}`}`)
      .join(" ");
    const row = el(d, "div", {
      className:
        "design-node" + (this.designerSel === spec.symbol ? " selected" : ""),
      text:
        `${spec.kind} ${spec.name ?? `#${spec.symbol}`}` +
        (events ? `  [${events}]` : "") +
        (spec.feeds.length ? `  feeds ${spec.feeds.map((f) => `#${f}`).join(",")}` : ""),
      onClick: () => {
        this.designerSel = spec.symbol;
        this.update(this.conn.state);
      },
    });
    const children = el(
      d,
      "div",
      { className: "design-children" },
      ...spec.children.map((c) => this.renderDesignNode(c)),
    );
    const wrap = el(d, "div", { className: CONTAINERS.has(spec.kind) ? "container" : "leaf" });
    wrap.append(row, children);
    return wrap;
  }
}

function hasSymbol(spec: FormSpec, symbol: number): boolean {
  if (spec.symbol === symbol) return true;
  return spec.children.some((c) => hasSymbol(c, symbol));
}

function coerce(text: string): PropertyValue {
  const trimmed = text.trim();
  if (/^-?\d+$/.test(trimmed)) return Number(trimmed);
  if (trimmed === "true") return true;
  if (trimmed === "false") return false;
  return trimmed;
}
