/** Tiny DOM construction helper shared by the workbench panes. */

export interface ElAttrs {
  className?: string;
  text?: string;
  title?: string;
  value?: string;
  placeholder?: string;
  onClick?: (event: MouseEvent) => void;
  onDblClick?: (event: MouseEvent) => void;
  onChange?: (event: Event) => void;
}

export function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: ElAttrs = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (attrs.className !== undefined) node.className = attrs.className;
  if (attrs.text !== undefined) node.textContent = attrs.text;
  if (attrs.title !== undefined) node.title = attrs.title;
  if (attrs.value !== undefined && "value" in node) {
    (node as HTMLInputElement).value = attrs.value;
  }
  if (attrs.placeholder !== undefined && "placeholder" in node) {
    (node as HTMLInputElement).placeholder = attrs.placeholder;
  }
  if (attrs.onClick) node.addEventListener("click", attrs.onClick as EventListener);
  if (attrs.onDblClick) node.addEventListener("dblclick", attrs.onDblClick as EventListener);
  if (attrs.onChange) node.addEventListener("change", attrs.onChange as EventListener);
  for (const child of children) {
    node.append(child);
  }
  return node;
}
