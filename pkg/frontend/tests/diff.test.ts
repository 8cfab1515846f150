import { describe, expect, it } from "vitest";
import { classifyDiff } from "../src/diff";

const SAMPLE = [
  "diff --git a/resolver.py b/resolver.py",
  "index 3f1c2aa..9b0d411 100644",
  "--- a/resolver.py",
  "+++ b/resolver.py",
  "@@ -10,7 +10,8 @@ class Resolver:",
  "     def lookup(self, key):",
  "-        return self._cache[key]",
  "+        return self._cache.get(key)",
].join("\n");

describe("classifyDiff", () => {
  it("labels header, hunk, add, del and context lines", () => {
    const kinds = classifyDiff(SAMPLE).map((l) => l.kind);
    expect(kinds).toEqual([
      "meta",
      "meta",
      "meta",
      "meta",
      "hunk",
      "context",
      "del",
      "add",
    ]);
  });

  it("does not confuse file headers with removals", () => {
    const lines = classifyDiff("--- a/x\n-removed");
    expect(lines[0]!.kind).toBe("meta");
    expect(lines[1]!.kind).toBe("del");
  });

  it("returns no lines for an empty diff", () => {
    expect(classifyDiff("")).toEqual([]);
  });

  it("ignores a trailing newline", () => {
    expect(classifyDiff("+a\n")).toHaveLength(1);
  });

  it("keeps line text verbatim", () => {
    const lines = classifyDiff(SAMPLE);
    expect(lines[6]!.text).toBe("-        return self._cache[key]");
  });
});
