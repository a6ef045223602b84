// View-model tests against JSON fixtures captured from the real service
// (see scripts/capture_fixtures.py). The core contract: every rendered bar
// value equals the service's number, and alert badges equal the membership
// of the alerts endpoint.

import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import type { AlertsResponse, CompareResponse, ComponentsInfo,
              ExplainResponse, StatesPage } from "../src/types";
import { alertBadges, buildExplanationView, dominantComponent,
         errorBannerText, formatValue, makeSequenceGate,
         sharedYScale } from "../src/viewmodel";

function fixture<T>(name: string): T {
  const url = new URL(`./fixtures/${name}.json`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf8")) as T;
}

const components = fixture<ComponentsInfo>("components");
const compare = fixture<CompareResponse>("compare");
const comparePair = fixture<{ a: CompareResponse; b: CompareResponse }>("compare_pair");
const alerts = fixture<AlertsResponse>("alerts");
const states = fixture<StatesPage>("states");
const factual = fixture<Record<string, ExplainResponse>>("factual_explains");
const error404 = fixture<{ status: number; body: unknown }>("error_404");

describe("buildExplanationView", () => {
  const view = buildExplanationView(components.names, compare.responses);

  it("renders one bar per action per component", () => {
    expect(view.bars.length).toBe(
      compare.responses.length * components.names.length);
  });

  it("orders bars by action group then component order", () => {
    const expected = compare.responses.flatMap((r) =>
      components.names.map((name) => [r.action, name]));
    expect(view.bars.map((b) => [b.action, b.component])).toEqual(expected);
  });

  it("copies every value and std verbatim from the service response", () => {
    for (const bar of view.bars) {
      const resp = compare.responses.find((r) => r.action === bar.action)!;
      const i = resp.components.indexOf(bar.component);
      expect(bar.value).toBe(resp.means[i]);
      expect(bar.std).toBe(resp.stds[i]);
    }
  });

  it("matches the service values at display precision", () => {
    for (const bar of view.bars) {
      const resp = compare.responses.find((r) => r.action === bar.action)!;
      const i = resp.components.indexOf(bar.component);
      expect(formatValue(bar.value)).toBe(formatValue(resp.means[i]));
    }
  });

  it("signs bars exactly as stored", () => {
    for (const bar of view.bars) {
      expect(bar.negative).toBe(bar.value < 0);
    }
    expect(view.bars.some((b) => b.negative)).toBe(true);
  });

  it("annotates totals straight from the responses", () => {
    expect(view.totals).toEqual(
      compare.responses.map((r) => ({ action: r.action, total: r.total })));
  });

  it("highlights the dominant component between the first two actions", () => {
    const [a, b] = compare.responses;
    let expected = "";
    let best = -Infinity;
    components.names.forEach((name, i) => {
      const d = Math.abs(a.means[i] - b.means[i]);
      if (d > best) {
        best = d;
        expected = name;
      }
    });
    expect(view.dominant).toBe(expected);
    for (const bar of view.bars) {
      expect(bar.dominant).toBe(bar.component === expected);
    }
  });

  it("has no dominant highlight for a single response", () => {
    const single = buildExplanationView(components.names,
                                        [compare.responses[0]]);
    expect(single.dominant).toBeNull();
  });
});

describe("dominantComponent tie rule", () => {
  it("breaks ties to the first component in order", () => {
    const a = compare.responses[0];
    const equal = { ...a, action: a.action + 1 };
    expect(dominantComponent(components.names, a, equal))
      .toBe(components.names[0]);
  });
});

describe("sharedYScale", () => {
  it("is the max absolute mean across both responses", () => {
    const groups = [comparePair.a.responses, comparePair.b.responses];
    const expected = Math.max(...groups.flatMap((g) =>
      g.flatMap((r) => r.means.map(Math.abs))));
    expect(sharedYScale(groups)).toBe(expected);
  });

  it("falls back to a finite axis for all-zero data", () => {
    const zero = { ...compare.responses[0], means: [0, 0, 0] };
    expect(sharedYScale([[zero]])).toBe(1);
  });
});

describe("alert badges", () => {
  it("equal the alerts endpoint membership exactly", () => {
    const badges = alertBadges(alerts);
    const flagged = new Set(alerts.alerts.map((a) => a.state_id));
    for (const s of states.states) {
      expect(badges.has(s.id)).toBe(flagged.has(s.id));
    }
    for (const entry of alerts.alerts) {
      expect(badges.get(entry.state_id)).toEqual(entry.flags);
    }
  });

  it("agree with the factual event flags of every state", () => {
    const badges = alertBadges(alerts);
    for (const [sid, resp] of Object.entries(factual)) {
      const anyFlag = Object.values(resp.event_flags).some(Boolean);
      expect(badges.has(sid)).toBe(anyFlag);
    }
  });
});

describe("error banner", () => {
  it("surfaces the service's own message verbatim", () => {
    const text = errorBannerText(error404.status, error404.body);
    const detail = (error404.body as { detail: string }).detail;
    expect(text).toBe(`error ${error404.status}: ${detail}`);
    expect(text).toContain("s-9999");
  });

  it("copes with bodies that have no detail field", () => {
    expect(errorBannerText(500, null)).toBe("error 500");
  });
});

describe("sequence gate", () => {
  it("discards responses of superseded requests", () => {
    const gate = makeSequenceGate();
    const first = gate.next();
    const second = gate.next();
    expect(gate.isCurrent(first)).toBe(false);
    expect(gate.isCurrent(second)).toBe(true);
  });
});
