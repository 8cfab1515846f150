/** Session controller: walks the task queue, wiring editor, tracker and API. */

import { AnnotClient, ApiError, type TaskPayload } from "./api.js";
import { ChangeTracker } from "./tracker.js";
import { changeBetween } from "./textarea-op.js";
import { renderError, renderTask, type TaskView } from "./view.js";

export interface ControllerOptions {
  confirmFn?: (message: string) => boolean;
  notifyFn?: (message: string) => void;
  debounceMs?: number;
  flushAt?: number;
  clock?: () => number;
}

export class SessionController {
  private sessionId = "";
  private tracker: ChangeTracker | null = null;
  private view: TaskView | null = null;
  private lastValue = "";

  private readonly confirmFn: (message: string) => boolean;
  private readonly notifyFn: (message: string) => void;

  constructor(
    private readonly client: AnnotClient,
    private readonly host: HTMLElement,
    private readonly opts: ControllerOptions = {}
  ) {
    this.confirmFn = opts.confirmFn ?? ((msg) => window.confirm(msg));
    this.notifyFn = opts.notifyFn ?? ((msg) => window.alert(msg));
  }

  async start(annotatorId: string): Promise<void> {
    try {
      const session = await this.client.createSession(annotatorId);
      this.sessionId = session.session_id;
      await this.loadTask();
    } catch (err) {
      renderError(this.host, `Could not start session: ${String(err)}`);
    }
  }

  async loadTask(): Promise<void> {
    this.tracker?.dispose();
    this.tracker = null;
    let payload: TaskPayload;
    try {
      payload = await this.client.task(this.sessionId);
    } catch (err) {
      renderError(this.host, `Could not load task: ${String(err)}`);
      return;
    }

    this.view = renderTask(this.host, payload, {
      onInput: (field) => this.handleInput(field),
      onSubmit: () => void this.handleSubmit(),
      onSkip: () => void this.handleSkip(),
    });
    if (this.view === null || payload.message_id === undefined) return;

    this.lastValue = payload.generated_text ?? "";
    this.tracker = new ChangeTracker({
      messageId: payload.message_id,
      baseText: this.lastValue,
      transport: {
        sendEvents: (messageId, events) =>
          this.client.sendEvents(this.sessionId, messageId, events),
      },
      clock: this.opts.clock,
      debounceMs: this.opts.debounceMs,
      flushAt: this.opts.flushAt,
      onStateChange: (tracker) => {
        this.view?.setSubmitEnabled(tracker.idle());
        if (tracker.lastFailure) {
          this.view?.showNotice("Sync failed; retrying on next change or submit.");
        }
      },
    });
  }

  private handleInput(field: { value: string; selectionStart: number }): void {
    if (this.tracker === null) return;
    const change = changeBetween(this.lastValue, field);
    this.lastValue = field.value;
    if (change !== null) this.tracker.record(change);
  }

  private async handleSubmit(): Promise<void> {
    const tracker = this.tracker;
    const view = this.view;
    if (tracker === null || view === null) return;
    if (!tracker.modified()) {
      const ok = this.confirmFn("No edits were made. Submit the draft unchanged?");
      if (!ok) return;
    }
    view.setSubmitEnabled(false);
    try {
      await tracker.settle();
      await this.client.submit(this.sessionId, tracker.messageId, tracker.text);
      tracker.dispose();
      await this.loadTask();
    } catch (err) {
      if (err instanceof ApiError && err.conflict !== null) {
        this.notifyFn(
          "The server could not reproduce your text from the recorded changes." +
            " The session was resynchronized; please submit again."
        );
        tracker.forceResync();
      } else {
        view.showNotice(`Submit failed: ${String(err)}`);
      }
      view.setSubmitEnabled(tracker.idle());
    }
  }

  private async handleSkip(): Promise<void> {
    try {
      await this.client.skip(this.sessionId);
      await this.loadTask();
    } catch (err) {
      this.view?.showNotice(`Skip failed: ${String(err)}`);
    }
  }
}

export function main(): void {
  const host = document.getElementById("annotui-root");
  if (host === null) return;
  const params = new URLSearchParams(window.location.search);
  const service = params.get("service") ?? window.location.origin;
  const annotator = params.get("annotator") ?? window.prompt("Annotator id:") ?? "";
  const controller = new SessionController(new AnnotClient(service), host);
  void controller.start(annotator);
}

if (typeof document !== "undefined" && document.getElementById("annotui-root") !== null) {
  main();
}
