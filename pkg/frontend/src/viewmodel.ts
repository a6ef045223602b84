// Pure view-model builders. Every number placed on screen is copied from a
// service response; the only arithmetic here is picking maxima for axis
// scaling and absolute differences for the dominant-component highlight.

import type { AlertsResponse, ExplainResponse } from "./types.js";

export interface Bar {
  action: number;
  component: string;
  value: number;
  std: number;
  negative: boolean;
  dominant: boolean;
}

export interface ExplanationViewModel {
  bars: Bar[];
  totals: { action: number; total: number }[];
  dominant: string | null;
}

// Component whose explanations differ most between the first two responses.
// Strict greater-than means ties resolve to the earliest component.
export function dominantComponent(componentNames: string[],
                                  a: ExplainResponse,
                                  b: ExplainResponse): string {
  let best = 0;
  let bestDiff = -Infinity;
  componentNames.forEach((name, i) => {
    const diff = Math.abs(valueFor(a, name) - valueFor(b, name));
    if (diff > bestDiff) {
      best = i;
      bestDiff = diff;
    }
  });
  return componentNames[best];
}

function valueFor(resp: ExplainResponse, component: string): number {
  const i = resp.components.indexOf(component);
  if (i < 0) {
    throw new Error(`response for action ${resp.action} lacks component ${component}`);
  }
  return resp.means[i];
}

function stdFor(resp: ExplainResponse, component: string): number {
  return resp.stds[resp.components.indexOf(component)];
}

// One bar per component per action, grouped by action, components in the
// order the service lists them under /api/components.
export function buildExplanationView(componentNames: string[],
                                     responses: ExplainResponse[]
                                     ): ExplanationViewModel {
  const dominant = responses.length >= 2
    ? dominantComponent(componentNames, responses[0], responses[1])
    : null;
  const bars: Bar[] = [];
  for (const resp of responses) {
    for (const name of componentNames) {
      const value = valueFor(resp, name);
      bars.push({
        action: resp.action,
        component: name,
        value,
        std: stdFor(resp, name),
        negative: value < 0,
        dominant: name === dominant,
      });
    }
  }
  return {
    bars,
    totals: responses.map((r) => ({ action: r.action, total: r.total })),
    dominant,
  };
}

// Shared y-scale for side-by-side panels: the largest absolute mean across
// every response in every group. Falls back to 1 so an all-zero chart still
// has a finite axis.
export function sharedYScale(groups: ExplainResponse[][]): number {
  let max = 0;
  for (const group of groups) {
    for (const resp of group) {
      for (const m of resp.means) {
        max = Math.max(max, Math.abs(m));
      }
    }
  }
  return max > 0 ? max : 1;
}

// state id -> flags, straight from the alerts endpoint. States absent from
// the response get no badge.
export function alertBadges(alerts: AlertsResponse): Map<string, string[]> {
  const badges = new Map<string, string[]>();
  for (const entry of alerts.alerts) {
    badges.set(entry.state_id, entry.flags);
  }
  return badges;
}

// Text for the error banner: prefer the service's own "detail" message.
export function errorBannerText(status: number, body: unknown): string {
  if (body && typeof body === "object" && "detail" in body) {
    const detail = (body as { detail: unknown }).detail;
    if (typeof detail === "string") {
      return `error ${status}: ${detail}`;
    }
    return `error ${status}: ${JSON.stringify(detail)}`;
  }
  return `error ${status}`;
}

// Monotone ticket counter for in-flight fetches. A response is applied only
// if no newer request was issued for the same slot since it started.
export interface SequenceGate {
  next(): number;
  isCurrent(ticket: number): boolean;
}

export function makeSequenceGate(): SequenceGate {
  let latest = 0;
  return {
    next() {
      latest += 1;
      return latest;
    },
    isCurrent(ticket: number) {
      return ticket === latest;
    },
  };
}

// Display precision used everywhere a return value is printed.
export function formatValue(x: number): string {
  return x.toFixed(4);
}
