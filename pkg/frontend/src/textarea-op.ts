/**
 * Derive a single change record from two textarea snapshots.
 *
 * Native input events do not say what changed, only that something did, so
 * the change is reconstructed by comparing the previous value with the new
 * one. The caret position is used as an anchor when it is consistent with
 * the edit (after typing or pasting the caret sits right after the inserted
 * text); otherwise a plain prefix/suffix scan decides. When several
 * positions would explain the edit equally well, the latest one wins, since
 * people mostly type at the end of what they already wrote.
 */

export interface TextFieldState {
  value: string;
  selectionStart: number;
}

export interface Change {
  position: number;
  deleted_len: number;
  inserted_text: string;
}

function commonPrefix(a: string, b: string, limit: number): number {
  let n = 0;
  while (n < limit && a.charAt(n) === b.charAt(n)) n++;
  return n;
}

function cursorTail(previous: string, field: TextFieldState): number | null {
  const tail = field.value.length - field.selectionStart;
  if (tail < 0 || tail > previous.length) return null;
  if (previous.slice(previous.length - tail) !== field.value.slice(field.value.length - tail)) {
    return null;
  }
  return tail;
}

export function changeBetween(previous: string, field: TextFieldState): Change | null {
  const value = field.value;
  if (previous === value) return null;

  let tail = cursorTail(previous, field);
  let start: number;
  if (tail !== null) {
    start = commonPrefix(previous, value, Math.min(previous.length, value.length) - tail);
  } else {
    start = commonPrefix(previous, value, Math.min(previous.length, value.length));
    tail = 0;
    while (
      tail + start < previous.length &&
      tail + start < value.length &&
      previous.charAt(previous.length - 1 - tail) === value.charAt(value.length - 1 - tail)
    ) {
      tail++;
    }
  }

  return {
    position: start,
    deleted_len: previous.length - tail - start,
    inserted_text: value.slice(start, value.length - tail),
  };
}

/** Fold a change into a string the same way the server replays it. */
export function applyChange(text: string, change: Change): string {
  return (
    text.slice(0, change.position) +
    change.inserted_text +
    text.slice(change.position + change.deleted_len)
  );
}
