/** Ballot state for one respondent, free of any DOM dependency.
 *
 * The session enforces grid and floor legality at interaction time, so every
 * reachable state holds allocations on the increment grid and at or above
 * each area's floor. Balance is not forced mid-session; it is displayed as
 * the unallocated counter and gates submission instead.
 */

export type Mode = "delta" | "likert";

export interface AreaSpec {
  readonly id: string;
  readonly name: string;
  readonly baselineCents: number;
}

export interface DemographicAxisSpec {
  readonly id: string;
  readonly categories: readonly string[];
}

export interface BallotSpec {
  readonly mode: Mode;
  readonly areas: readonly AreaSpec[];
  readonly incrementCents: number;
  readonly floorFraction: number;
  readonly feeCategories: readonly string[];
  readonly demographicAxes: readonly DemographicAxisSpec[];
}

export const FEE_LEVELS = [0, 1, 2] as const;
export const TAX_LEVELS = [-1, 0, 1] as const;
export const FIVE_POINT_LEVELS = [-2, -1, 0, 1, 2] as const;

export const FEE_LABELS: Readonly<Record<number, string>> = {
  0: "No change",
  1: "Moderate increase",
  2: "Significant increase",
};

export const TAX_LABELS: Readonly<Record<number, string>> = {
  [-1]: "Oppose",
  0: "No opinion",
  1: "Support",
};

export const FIVE_POINT_LABELS: Readonly<Record<number, string>> = {
  [-2]: "Significant decrease",
  [-1]: "Moderate decrease",
  0: "No change",
  1: "Moderate increase",
  2: "Significant increase",
};

function fail(message: string): never {
  throw new Error(message);
}

function asObject(value: unknown, what: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    fail(`${what} must be an object`);
  }
  return value as Record<string, unknown>;
}

function asString(value: unknown, what: string): string {
  if (typeof value !== "string" || value === "") fail(`${what} must be a nonempty string`);
  return value;
}

function asCents(value: unknown, what: string): number {
  if (typeof value !== "number" || !Number.isSafeInteger(value)) {
    fail(`${what} must be an integer number of cents`);
  }
  return value;
}

/** Validate and narrow the GET /api/spec payload. Throws on anything off. */
export function parseSpec(wire: unknown): BallotSpec {
  const doc = asObject(wire, "spec document");
  const mode = doc["mode"] === undefined ? "delta" : doc["mode"];
  if (mode !== "delta" && mode !== "likert") fail(`unknown mode ${JSON.stringify(mode)}`);

  if (!Array.isArray(doc["areas"]) || doc["areas"].length === 0) {
    fail("spec has no service areas");
  }
  const areas: AreaSpec[] = doc["areas"].map((raw, i) => {
    const a = asObject(raw, `area ${i}`);
    const baseline = asCents(a["baseline_cents"], `area ${i} baseline_cents`);
    if (baseline < 0) fail(`area ${i} baseline is negative`);
    return {
      id: asString(a["id"], `area ${i} id`),
      name: asString(a["name"], `area ${i} name`),
      baselineCents: baseline,
    };
  });
  const ids = new Set(areas.map((a) => a.id));
  if (ids.size !== areas.length) fail("duplicate area ids");

  const increment = asCents(doc["increment_cents"], "increment_cents");
  if (increment <= 0) fail("increment_cents must be positive");

  const frac = doc["floor_fraction"];
  if (typeof frac !== "number" || !(frac >= 0 && frac <= 1)) {
    fail("floor_fraction must be a number in [0, 1]");
  }

  const fees = doc["fee_categories"] ?? [];
  if (!Array.isArray(fees)) fail("fee_categories must be an array");
  const feeCategories = fees.map((c, i) => asString(c, `fee category ${i}`));

  const axesRaw = doc["demographic_axes"] ?? [];
  if (!Array.isArray(axesRaw)) fail("demographic_axes must be an array");
  const demographicAxes: DemographicAxisSpec[] = axesRaw.map((raw, i) => {
    const ax = asObject(raw, `demographic axis ${i}`);
    const cats = ax["categories"];
    if (!Array.isArray(cats) || cats.length === 0) {
      fail(`demographic axis ${i} has no categories`);
    }
    return {
      id: asString(ax["id"], `demographic axis ${i} id`),
      categories: cats.map((c, j) => asString(c, `axis ${i} category ${j}`)),
    };
  });

  return { mode, areas, incrementCents: increment, floorFraction: frac, feeCategories, demographicAxes };
}

export type SubmissionStatus =
  | { readonly kind: "editing" }
  | { readonly kind: "submitting" }
  | { readonly kind: "accepted"; readonly receiptId: string }
  | { readonly kind: "rejected"; readonly detail: string }
  | { readonly kind: "transport_error"; readonly message: string };

/** One respondent's working ballot. All money amounts are integer cents. */
export class BallotSession {
  readonly spec: BallotSpec;
  private readonly working = new Map<string, number>();
  private readonly fivePoint = new Map<string, number>();
  private readonly fees = new Map<string, number>();
  private tax: number | null = null;
  private readonly demographics = new Map<string, string>();
  status: SubmissionStatus = { kind: "editing" };

  constructor(spec: BallotSpec) {
    this.spec = spec;
    for (const area of spec.areas) this.working.set(area.id, area.baselineCents);
  }

  get totalCents(): number {
    let total = 0;
    for (const area of this.spec.areas) total += area.baselineCents;
    return total;
  }

  private area(areaId: string): AreaSpec {
    const found = this.spec.areas.find((a) => a.id === areaId);
    if (!found) fail(`unknown area ${JSON.stringify(areaId)}`);
    return found;
  }

  allocationCents(areaId: string): number {
    this.area(areaId);
    return this.working.get(areaId)!;
  }

  deltaCents(areaId: string): number {
    return this.allocationCents(areaId) - this.area(areaId).baselineCents;
  }

  /** spec total minus the sum of the working allocation; zero gates submit. */
  get unallocatedCents(): number {
    let sum = 0;
    for (const v of this.working.values()) sum += v;
    return this.totalCents - sum;
  }

  /** Exact floor test: 1e6 * alloc >= baseline * (1e6 - fraction * 1e6).
   *
   * Scaled BigInt arithmetic sidesteps both float rounding in the fraction
   * and precision loss on large budgets; any floor fraction with at most
   * six decimal places is represented exactly.
   */
  private floorOk(area: AreaSpec, allocCents: number): boolean {
    const frac6 = BigInt(Math.round(this.spec.floorFraction * 1e6));
    return (
      BigInt(allocCents) * 1_000_000n >= BigInt(area.baselineCents) * (1_000_000n - frac6)
    );
  }

  canIncrease(areaId: string): boolean {
    this.area(areaId);
    return this.spec.mode === "delta";
  }

  canDecrease(areaId: string): boolean {
    const area = this.area(areaId);
    if (this.spec.mode !== "delta") return false;
    return this.floorOk(area, this.allocationCents(areaId) - this.spec.incrementCents);
  }

  /** Move one increment. Illegal moves throw; the UI never offers them. */
  adjust(areaId: string, direction: 1 | -1): void {
    const area = this.area(areaId);
    if (this.spec.mode !== "delta") fail("allocations are fixed in five-point mode");
    const next = this.allocationCents(areaId) + direction * this.spec.incrementCents;
    if (direction < 0 && !this.floorOk(area, next)) {
      fail(`decrease blocked: ${areaId} is at its floor`);
    }
    this.working.set(areaId, next);
  }

  setFivePoint(areaId: string, level: number): void {
    this.area(areaId);
    if (this.spec.mode !== "likert") fail("five-point answers apply only in five-point mode");
    if (!FIVE_POINT_LEVELS.includes(level as (typeof FIVE_POINT_LEVELS)[number])) {
      fail(`five-point level must be one of ${FIVE_POINT_LEVELS.join(", ")}`);
    }
    this.fivePoint.set(areaId, level);
  }

  fivePointLevel(areaId: string): number | null {
    this.area(areaId);
    return this.fivePoint.get(areaId) ?? null;
  }

  setFee(category: string, level: number): void {
    if (!this.spec.feeCategories.includes(category)) {
      fail(`unknown fee category ${JSON.stringify(category)}`);
    }
    if (!FEE_LEVELS.includes(level as (typeof FEE_LEVELS)[number])) {
      fail(`fee level must be one of ${FEE_LEVELS.join(", ")}`);
    }
    this.fees.set(category, level);
  }

  feeLevel(category: string): number | null {
    return this.fees.get(category) ?? null;
  }

  setTax(level: number): void {
    if (!TAX_LEVELS.includes(level as (typeof TAX_LEVELS)[number])) {
      fail(`tax stance must be one of ${TAX_LEVELS.join(", ")}`);
    }
    this.tax = level;
  }

  get taxLevel(): number | null {
    return this.tax;
  }

  setDemographic(axisId: string, category: string): void {
    const axis = this.spec.demographicAxes.find((a) => a.id === axisId);
    if (!axis) fail(`unknown demographic axis ${JSON.stringify(axisId)}`);
    if (!axis.categories.includes(category)) {
      fail(`${JSON.stringify(category)} is not a category of ${axisId}`);
    }
    this.demographics.set(axisId, category);
  }

  demographic(axisId: string): string | null {
    return this.demographics.get(axisId) ?? null;
  }

  /** Every question answered, demographics excepted (they stay optional). */
  get surveyComplete(): boolean {
    if (this.spec.mode === "likert") {
      for (const area of this.spec.areas) {
        if (!this.fivePoint.has(area.id)) return false;
      }
    }
    for (const cat of this.spec.feeCategories) {
      if (!this.fees.has(cat)) return false;
    }
    return this.tax !== null;
  }

  get canSubmit(): boolean {
    if (this.status.kind === "submitting" || this.status.kind === "accepted") return false;
    if (!this.surveyComplete) return false;
    return this.spec.mode === "likert" || this.unallocatedCents === 0;
  }

  /** Wire answers for POST /api/ballot. Allocation questions always cover
   * every area; demographics appear only where answered. */
  answers(): Record<string, number | string> {
    const out: Record<string, number | string> = {};
    if (this.spec.mode === "delta") {
      for (const area of this.spec.areas) out[`exp:${area.id}`] = this.deltaCents(area.id);
    } else {
      for (const [areaId, level] of this.fivePoint) out[`lik:${areaId}`] = level;
    }
    for (const [cat, level] of this.fees) out[`fee:${cat}`] = level;
    if (this.tax !== null) out["tax"] = this.tax;
    for (const [axis, cat] of this.demographics) out[`dem:${axis}`] = cat;
    return out;
  }
}

export function formatCents(cents: number): string {
  const sign = cents < 0 ? "-" : "";
  const abs = Math.abs(cents);
  const dollars = Math.floor(abs / 100).toLocaleString("en-US");
  return `${sign}$${dollars}.${String(abs % 100).padStart(2, "0")}`;
}
