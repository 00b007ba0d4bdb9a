// Pure DOM builders. The probability number shown is the service's query
// point verbatim; the bar is a redundant visual aid.

import type { ParameterBelief, QueryCard, Recommendation } from "./types.js";

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

export function formatProbability(p: number): string {
  return p.toFixed(4);
}

function chips(values: Record<string, string>, className: string): HTMLElement {
  const wrap = el("div", className);
  for (const [attr, value] of Object.entries(values)) {
    const chip = el("span", "chip");
    chip.dataset.attribute = attr;
    chip.append(el("span", "chip-attr", attr), el("span", "chip-value", value));
    wrap.append(chip);
  }
  return wrap;
}

export function renderGamble(gamble: {
  probability: number;
  top: Record<string, string>;
  bottom: Record<string, string>;
}): HTMLElement {
  const box = el("div", "gamble");
  const p = gamble.probability;
  const headline = el("div", "gamble-headline");
  const exact = el("span", "gamble-probability", formatProbability(p));
  exact.dataset.probability = String(p);
  headline.append(
    exact,
    el("span", "gamble-text", " chance of the best anchor, otherwise the worst anchor"),
  );
  const bar = el("div", "gamble-bar");
  const win = el("div", "gamble-bar-top");
  win.style.width = `${(p * 100).toFixed(2)}%`;
  const lose = el("div", "gamble-bar-bottom");
  lose.style.width = `${((1 - p) * 100).toFixed(2)}%`;
  bar.append(win, lose);
  const anchors = el("div", "gamble-anchors");
  anchors.append(
    el("div", "gamble-anchor-label", "best anchor:"),
    chips(gamble.top, "config-chips"),
    el("div", "gamble-anchor-label", "worst anchor:"),
    chips(gamble.bottom, "config-chips"),
  );
  box.append(headline, bar, anchors);
  return box;
}

export function renderQueryCard(card: QueryCard): HTMLElement {
  const root = el("section", "query-card");
  root.dataset.queryId = card.query_id;
  root.append(el("h2", "query-title", `Question ${card.query_id.slice(1)}`));
  if (card.config) {
    root.append(el("p", "query-lead", "Would you take this option..."));
    root.append(chips(card.config, "config-chips query-config"));
  }
  if (card.gamble) {
    root.append(el("p", "query-lead", `...or a gamble at p = ${formatProbability(card.gamble.probability)}?`));
    root.append(renderGamble(card.gamble));
  }
  if (card.conditioning && Object.keys(card.conditioning).length > 0) {
    const note = document.createElement("details");
    note.className = "conditioning-note";
    const summary = el("summary", undefined, "Context held fixed for this question");
    note.append(summary);
    note.append(
      el(
        "p",
        "conditioning-text",
        "Answer as if these related attributes stay at their default levels:",
      ),
    );
    note.append(chips(card.conditioning, "config-chips conditioning-chips"));
    root.append(note);
  }
  return root;
}

export function renderBeliefStrips(parameters: ParameterBelief[]): HTMLElement {
  const wrap = el("div", "belief-strips");
  for (const param of parameters) {
    const row = el("div", "belief-row");
    const key = `${param.factor}:${Object.values(param.config).join(",")}`;
    row.dataset.parameter = key;
    const label = el(
      "div",
      "belief-label",
      Object.entries(param.config)
        .map(([a, v]) => `${a}=${v}`)
        .join(" "),
    );
    const strip = el("div", "belief-strip");
    const maxDensity = Math.max(
      ...param.components.map(([lo, up, w]) => w / Math.max(up - lo, 1e-12)),
    );
    let weightTotal = 0;
    for (const [lo, up, w] of param.components) {
      const band = el("div", "belief-band");
      const density = w / Math.max(up - lo, 1e-12);
      band.style.left = `${(lo * 100).toFixed(2)}%`;
      band.style.width = `${((up - lo) * 100).toFixed(2)}%`;
      band.style.opacity = (0.15 + 0.85 * (density / maxDensity)).toFixed(3);
      band.dataset.weight = w.toFixed(6);
      band.title = `[${lo.toFixed(3)}, ${up.toFixed(3)}] weight ${(w * 100).toFixed(1)}%`;
      weightTotal += w;
      strip.append(band);
    }
    const marker = el("div", "belief-mean");
    marker.style.left = `${(param.mean * 100).toFixed(2)}%`;
    strip.append(marker);
    const meta = el(
      "div",
      "belief-meta",
      `mean ${param.mean.toFixed(3)} · weights ${(weightTotal * 100).toFixed(0)}%`,
    );
    row.append(label, strip, meta);
    wrap.append(row);
  }
  return wrap;
}

export function renderRecommendation(
  rec: Recommendation | null,
  queriesAnswered: number,
  lastEvoi: number | null,
): HTMLElement {
  const box = el("section", "recommendation");
  box.append(el("h2", undefined, "Current recommendation"));
  const counter = el("div", "query-counter", `${queriesAnswered} answered`);
  counter.dataset.count = String(queriesAnswered);
  box.append(counter);
  if (lastEvoi !== null) {
    const evoi = el("div", "last-evoi", `value of last answer: ${lastEvoi.toExponential(3)}`);
    evoi.dataset.evoi = String(lastEvoi);
    box.append(evoi);
  }
  if (!rec) {
    box.append(el("p", "empty", "No recommendation yet."));
    return box;
  }
  box.append(chips(rec.outcome, "config-chips recommendation-outcome"));
  const value = el("div", "recommendation-value", `expected utility ${rec.expected_utility.toFixed(6)}`);
  value.dataset.value = String(rec.expected_utility);
  box.append(value);
  const table = el("div", "factor-contributions");
  for (const [factor, contribution] of Object.entries(rec.per_factor)) {
    const row = el("div", "factor-row");
    row.dataset.factor = factor;
    row.append(
      el("span", "factor-name", `factor ${factor}`),
      el("span", "factor-value", contribution.toFixed(6)),
    );
    table.append(row);
  }
  box.append(table);
  return box;
}
