/**
 * DOM construction for one labeling task: commit diff on the left, tracked
 * editor seeded with the machine draft on the right. Help and commit-summary
 * panels start collapsed; the summary toggle is omitted entirely when the
 * task carries no summary.
 */

import type { TaskPayload } from "./api.js";
import { classifyDiff } from "./diff.js";
import type { TextFieldState } from "./textarea-op.js";

export interface TaskViewHooks {
  onInput: (field: TextFieldState) => void;
  onSubmit: () => void;
  onSkip: () => void;
}

export interface TaskView {
  root: HTMLElement;
  editor: HTMLTextAreaElement;
  submitButton: HTMLButtonElement;
  skipButton: HTMLButtonElement;
  setSubmitEnabled(enabled: boolean): void;
  showNotice(text: string): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function collapsible(label: string, body: string): HTMLElement {
  const wrap = el("div", "collapsible");
  const button = el("button", "toggle", label);
  button.type = "button";
  const section = el("div", "toggle-body", body);
  section.hidden = true;
  button.addEventListener("click", () => {
    section.hidden = !section.hidden;
  });
  wrap.append(button, section);
  return wrap;
}

function diffPane(diff: string): HTMLElement {
  const pane = el("div", "diff-pane");
  const lines = classifyDiff(diff);
  if (lines.length === 0) {
    pane.append(el("div", "notice", "empty diff"));
    return pane;
  }
  const pre = el("pre", "diff");
  for (const line of lines) {
    pre.append(el("div", `diff-line ${line.kind}`, line.text));
  }
  pane.append(pre);
  return pane;
}

export function renderDone(host: HTMLElement, payload: TaskPayload): void {
  host.textContent = "";
  const total = payload.total ?? payload.completed ?? 0;
  host.append(el("div", "done-view", `All ${total} tasks complete. Thank you.`));
}

export function renderError(host: HTMLElement, message: string): void {
  host.textContent = "";
  host.append(el("div", "error-view", message));
}

export function renderTask(
  host: HTMLElement,
  payload: TaskPayload,
  hooks: TaskViewHooks
): TaskView | null {
  if (payload.done) {
    renderDone(host, payload);
    return null;
  }
  if (
    typeof payload.message_id !== "string" ||
    typeof payload.generated_text !== "string" ||
    typeof payload.diff !== "string"
  ) {
    renderError(host, "Malformed task payload.");
    return null;
  }

  host.textContent = "";
  const root = el("div", "task-view");

  const header = el("div", "task-header");
  header.append(
    el("span", "progress", `Task ${(payload.position ?? 0) + 1} of ${payload.total ?? "?"}`),
    el("span", "commit-id", payload.commit_id ?? "")
  );
  header.append(collapsible("Help", payload.help_text ?? ""));
  if (payload.summary) {
    header.append(collapsible("Commit summary", payload.summary));
  }
  root.append(header);

  const split = el("div", "split");
  split.append(diffPane(payload.diff));

  const editorPane = el("div", "editor-pane");
  const editor = el("textarea", "editor");
  editor.value = payload.generated_text;
  editor.addEventListener("input", () => {
    hooks.onInput({ value: editor.value, selectionStart: editor.selectionStart });
  });
  editorPane.append(editor);

  const controls = el("div", "controls");
  const submitButton = el("button", "submit", "Submit");
  submitButton.type = "button";
  submitButton.addEventListener("click", hooks.onSubmit);
  const skipButton = el("button", "skip", "Skip");
  skipButton.type = "button";
  skipButton.addEventListener("click", hooks.onSkip);
  const status = el("span", "status");
  controls.append(submitButton, skipButton, status);
  editorPane.append(controls);

  split.append(editorPane);
  root.append(split);
  host.append(root);

  return {
    root,
    editor,
    submitButton,
    skipButton,
    setSubmitEnabled(enabled: boolean) {
      submitButton.disabled = !enabled;
    },
    showNotice(text: string) {
      status.textContent = text;
    },
  };
}
