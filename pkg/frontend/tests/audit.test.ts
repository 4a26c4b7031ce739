import { describe, expect, it } from "vitest";

import { makeCtfAuditor } from "../src/api.js";

describe("ground-truth payload auditor", () => {
  it("accepts a select response and records the reveal", () => {
    const revealed = new Set<string>();
    const audit = makeCtfAuditor(revealed);
    audit(
      { hole_id: "h1", ctf: 4.2, is_low: true, score: 1, remaining: 9 },
      "http://x/v1/sessions/s/select",
    );
    expect(revealed.has("h1")).toBe(true);
  });

  it("accepts views that only expose revealed holes", () => {
    const revealed = new Set(["h1"]);
    const audit = makeCtfAuditor(revealed);
    audit(
      {
        patch_id: "p",
        holes: [
          { hole_id: "h1", x: 0, y: 0, state: "revealed", ctf: 4.2, is_low: true },
          { hole_id: "h2", x: 1, y: 0, state: "unknown" },
        ],
      },
      "http://x/v1/sessions/s/view?patch=p",
    );
  });

  it("rejects ground truth for unrevealed holes", () => {
    const audit = makeCtfAuditor(new Set());
    expect(() =>
      audit(
        { holes: [{ hole_id: "h9", ctf: 3.3 }] },
        "http://x/v1/sessions/s/view?patch=p",
      ),
    ).toThrow(/unrevealed/);
  });

  it("rejects anonymous ground truth", () => {
    const audit = makeCtfAuditor(new Set());
    expect(() => audit({ ctf: 3.3 }, "http://x/v1/anything")).toThrow(/without a hole_id/);
  });

  it("walks nested arrays and objects", () => {
    const audit = makeCtfAuditor(new Set());
    expect(() =>
      audit({ a: [{ b: { c: [{ hole_id: "hz", is_low: false }] } }] }, "http://x/v1/deep"),
    ).toThrow(/unrevealed/);
  });
});
