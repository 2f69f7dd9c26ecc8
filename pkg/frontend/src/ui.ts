/** DOM rendering for the ballot page.
 *
 * The page is re-rendered from the session after every interaction; all
 * legality lives in the session, so this layer only wires controls and
 * mirrors state. Controls for illegal moves render disabled, which is what
 * keeps invalid requests unreachable.
 */

import { submitBallot, SubmitOptions } from "./api.js";
import {
  BallotSession,
  FEE_LABELS,
  FEE_LEVELS,
  FIVE_POINT_LABELS,
  FIVE_POINT_LEVELS,
  TAX_LABELS,
  TAX_LEVELS,
  formatCents,
} from "./session.js";

export interface UiDeps {
  readonly baseUrl: string;
  readonly submitOptions?: SubmitOptions;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function radioRow(
  name: string,
  levels: readonly number[],
  labels: Readonly<Record<number, string>>,
  current: number | null,
  onPick: (level: number) => void,
): HTMLElement {
  const row = el("div", "choices");
  for (const level of levels) {
    const label = el("label", "choice");
    const input = el("input");
    input.type = "radio";
    input.name = name;
    input.value = String(level);
    input.checked = current === level;
    input.addEventListener("change", () => onPick(level));
    label.append(input, ` ${labels[level] ?? String(level)}`);
    row.append(label);
  }
  return row;
}

function allocationSection(session: BallotSession, rerender: () => void): HTMLElement {
  const section = el("section", "allocation");
  section.append(el("h2", undefined, "Budget allocation"));
  section.append(
    el(
      "p",
      "hint",
      `Move money between areas in ${formatCents(session.spec.incrementCents)} steps. ` +
        "Your total must match the city total before you can submit.",
    ),
  );
  const table = el("table");
  for (const area of session.spec.areas) {
    const tr = el("tr");
    tr.append(el("td", "area-name", area.name));

    const down = el("button", "step", "−");
    down.disabled = !session.canDecrease(area.id);
    down.title = down.disabled ? "At the floor: no further cuts allowed" : "Decrease";
    down.addEventListener("click", () => {
      session.adjust(area.id, -1);
      rerender();
    });

    const up = el("button", "step", "+");
    up.disabled = !session.canIncrease(area.id);
    up.addEventListener("click", () => {
      session.adjust(area.id, 1);
      rerender();
    });

    const amount = el("td", "amount", formatCents(session.allocationCents(area.id)));
    const delta = session.deltaCents(area.id);
    const deltaCell = el(
      "td",
      delta === 0 ? "delta" : delta > 0 ? "delta up" : "delta down",
      delta === 0 ? "±$0" : `${delta > 0 ? "+" : ""}${formatCents(delta)}`,
    );
    const controls = el("td", "controls");
    controls.append(down, up);
    tr.append(amount, deltaCell, controls);
    table.append(tr);
  }
  section.append(table);

  const unallocated = session.unallocatedCents;
  const counter = el(
    "p",
    unallocated === 0 ? "unallocated balanced" : "unallocated off",
    unallocated === 0
      ? "Balanced: every dollar is allocated."
      : `Unallocated: ${formatCents(unallocated)}`,
  );
  counter.setAttribute("data-unallocated", String(unallocated));
  section.append(counter);
  return section;
}

function fivePointSection(session: BallotSession, rerender: () => void): HTMLElement {
  const section = el("section", "five-point");
  section.append(el("h2", undefined, "Budget direction"));
  for (const area of session.spec.areas) {
    const block = el("div", "question");
    block.append(el("p", "prompt", area.name));
    block.append(
      radioRow(`lik-${area.id}`, FIVE_POINT_LEVELS, FIVE_POINT_LABELS, session.fivePointLevel(area.id), (lvl) => {
        session.setFivePoint(area.id, lvl);
        rerender();
      }),
    );
    section.append(block);
  }
  return section;
}

function surveySection(session: BallotSession, rerender: () => void): HTMLElement {
  const section = el("section", "survey");
  if (session.spec.feeCategories.length > 0) {
    section.append(el("h2", undefined, "Fees"));
    for (const cat of session.spec.feeCategories) {
      const block = el("div", "question");
      block.append(el("p", "prompt", cat));
      block.append(
        radioRow(`fee-${cat}`, FEE_LEVELS, FEE_LABELS, session.feeLevel(cat), (lvl) => {
          session.setFee(cat, lvl);
          rerender();
        }),
      );
      section.append(block);
    }
  }
  const taxBlock = el("div", "question");
  taxBlock.append(el("p", "prompt", "Property tax rate election"));
  taxBlock.append(
    radioRow("tax", TAX_LEVELS, TAX_LABELS, session.taxLevel, (lvl) => {
      session.setTax(lvl);
      rerender();
    }),
  );
  section.append(taxBlock);
  return section;
}

function demographicsSection(session: BallotSession, rerender: () => void): HTMLElement {
  const section = el("section", "demographics");
  section.append(el("h2", undefined, "About you (optional)"));
  for (const axis of session.spec.demographicAxes) {
    const block = el("div", "question");
    block.append(el("p", "prompt", axis.id));
    const select = el("select");
    select.name = `dem-${axis.id}`;
    const blank = el("option", undefined, "Prefer not to say");
    blank.value = "";
    select.append(blank);
    for (const cat of axis.categories) {
      const opt = el("option", undefined, cat);
      opt.value = cat;
      opt.selected = session.demographic(axis.id) === cat;
      select.append(opt);
    }
    select.addEventListener("change", () => {
      if (select.value !== "") {
        session.setDemographic(axis.id, select.value);
        rerender();
      }
    });
    block.append(select);
    section.append(block);
  }
  return section;
}

function statusSection(session: BallotSession, submit: () => void): HTMLElement {
  const section = el("section", "status");
  const button = el("button", "submit", "Submit ballot");
  button.disabled = !session.canSubmit;
  if (!session.surveyComplete) {
    button.title = "Answer every question first";
  } else if (session.spec.mode === "delta" && session.unallocatedCents !== 0) {
    button.title = "Balance the budget first";
  }
  button.addEventListener("click", submit);
  section.append(button);

  const st = session.status;
  if (st.kind === "submitting") {
    section.append(el("p", "note", "Submitting…"));
  } else if (st.kind === "accepted") {
    const note = el("p", "receipt", `Thank you. Your receipt: ${st.receiptId}`);
    note.setAttribute("data-receipt", st.receiptId);
    section.append(note);
  } else if (st.kind === "rejected") {
    // defense in depth: the controls should make this unreachable
    section.append(el("p", "error", `The server rejected the ballot: ${st.detail}`));
  } else if (st.kind === "transport_error") {
    section.append(
      el("p", "error", `Could not reach the server (${st.message}). Your answers are kept; try again.`),
    );
  }
  return section;
}

/** Render the whole page into `root` and keep it in sync with the session. */
export function render(root: HTMLElement, session: BallotSession, deps: UiDeps): void {
  const rerender = () => render(root, session, deps);

  const submit = async () => {
    if (!session.canSubmit) return;
    session.status = { kind: "submitting" };
    rerender();
    const result = await submitBallot(deps.baseUrl, session.answers(), deps.submitOptions);
    if (result.kind === "accepted") {
      session.status = { kind: "accepted", receiptId: result.receiptId };
    } else if (result.kind === "rejected") {
      const lines = result.validation.violations.map(
        (v) => `${v.constraint}${v.area_id ? ` (${v.area_id})` : ""}: ${v.detail}`,
      );
      session.status = { kind: "rejected", detail: lines.join("; ") || "invalid ballot" };
    } else if (result.kind === "refused") {
      session.status = { kind: "rejected", detail: result.detail };
    } else {
      session.status = { kind: "transport_error", message: result.message };
    }
    rerender();
  };

  root.replaceChildren();
  root.append(el("h1", undefined, "Budget feedback ballot"));
  if (session.spec.mode === "delta") {
    root.append(allocationSection(session, rerender));
  } else {
    root.append(fivePointSection(session, rerender));
  }
  root.append(surveySection(session, rerender));
  if (session.spec.demographicAxes.length > 0) {
    root.append(demographicsSection(session, rerender));
  }
  root.append(statusSection(session, submit));
}
