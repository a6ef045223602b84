// Shapes of the JSON documents served under /api/*. The UI consumes these
// verbatim and never recomputes returns on its own.

export interface ComponentsInfo {
  kind: string;
  names: string[];
  weights: number[];
  thresholds: Record<string, number>;
  methods: string[];
}

export interface StateSummary {
  id: string;
  trace_id: string;
  anchor: number;
  anchor_time: number;
  policy_action: number;
}

export interface StatesPage {
  total: number;
  offset: number;
  states: StateSummary[];
}

export interface StateDetail extends StateSummary {
  history: Record<string, number[] | number>;
  actions: number[];
}

export interface ExplainResponse {
  state_id: string;
  action: number;
  method: string;
  components: string[];
  means: number[];
  stds: number[];
  total: number;
  event_flags: Record<string, boolean>;
  latency_ms: number;
}

export interface CompareResponse {
  state_id: string;
  responses: ExplainResponse[];
}

export interface AlertEntry {
  state_id: string;
  trace_id: string;
  anchor: number;
  flags: string[];
}

export interface AlertsResponse {
  method: string;
  alerts: AlertEntry[];
}
