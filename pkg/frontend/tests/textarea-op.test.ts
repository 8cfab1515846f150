import { describe, expect, it } from "vitest";
import { applyChange, changeBetween } from "../src/textarea-op";

function afterEdit(previous: string, value: string, selectionStart: number) {
  return changeBetween(previous, { value, selectionStart });
}

describe("changeBetween", () => {
  it("returns null when nothing changed", () => {
    expect(afterEdit("abc", "abc", 3)).toBeNull();
  });

  it("captures typing a character at the end", () => {
    expect(afterEdit("fix bug", "fix bugs", 8)).toEqual({
      position: 7,
      deleted_len: 0,
      inserted_text: "s",
    });
  });

  it("captures typing at the start", () => {
    expect(afterEdit("bug", "a bug", 2)).toEqual({
      position: 0,
      deleted_len: 0,
      inserted_text: "a ",
    });
  });

  it("captures backspace", () => {
    expect(afterEdit("abcd", "abd", 2)).toEqual({
      position: 2,
      deleted_len: 1,
      inserted_text: "",
    });
  });

  it("captures replacing a selection with typed text", () => {
    // select "world" and type "there"
    expect(afterEdit("hello world", "hello there", 11)).toEqual({
      position: 6,
      deleted_len: 5,
      inserted_text: "there",
    });
  });

  it("captures pasting over a three character selection as one change", () => {
    const change = afterEdit("one two three", "one TWO-PASTED three", 12);
    expect(change).toEqual({ position: 4, deleted_len: 3, inserted_text: "TWO-PASTED" });
  });

  it("places ambiguous repeated-character inserts at the caret", () => {
    expect(afterEdit("aa", "aaa", 3)).toEqual({
      position: 2,
      deleted_len: 0,
      inserted_text: "a",
    });
    expect(afterEdit("aa", "aaa", 1)).toEqual({
      position: 0,
      deleted_len: 0,
      inserted_text: "a",
    });
  });

  it("falls back to a scan when the caret is inconsistent with the edit", () => {
    // programmatic value swap that left the caret at 0
    expect(afterEdit("abc", "abcx", 0)).toEqual({
      position: 3,
      deleted_len: 0,
      inserted_text: "x",
    });
  });

  it("handles newlines verbatim", () => {
    expect(afterEdit("line one", "line one\nline two", 17)).toEqual({
      position: 8,
      deleted_len: 0,
      inserted_text: "\nline two",
    });
  });

  it("round-trips random edits through applyChange", () => {
    // deterministic xorshift so failures reproduce
    let state = 0x9e3779b9 >>> 0;
    const rand = (n: number) => {
      state ^= state << 13;
      state ^= state >>> 17;
      state ^= state << 5;
      state >>>= 0;
      return state % n;
    };
    const alphabet = "ab c\nx";
    let text = "the quick brown fox";
    for (let i = 0; i < 500; i++) {
      const from = rand(text.length + 1);
      const to = from + rand(text.length + 1 - from);
      let insert = "";
      for (let k = rand(5); k > 0; k--) insert += alphabet[rand(alphabet.length)];
      const next = text.slice(0, from) + insert + text.slice(to);
      const caret = from + insert.length;
      const change = afterEdit(text, next, caret);
      if (change === null) {
        expect(next).toBe(text);
      } else {
        expect(applyChange(text, change)).toBe(next);
      }
      text = next;
      if (text.length > 400) text = text.slice(0, 50);
    }
  });
});
