import { ApiClient, ApiError } from "./api";
import { renderComparison, renderError } from "./comparison";
import { SteerController } from "./controller";
import { SessionState, type StorageLike } from "./session";
import { sweepPanel, type SweepAxis } from "./sweep";
import type { ModelInfo, SteerRequest } from "./types";

function field(doc: Document, label: string, name: string, value: string, type = "text"): HTMLLabelElement {
  const l = doc.createElement("label");
  const input = doc.createElement(name === "prompt" ? "textarea" : "input") as HTMLInputElement;
  input.name = name;
  if (name !== "prompt") input.type = type;
  if (type === "number") input.step = "any";
  input.value = value;
  l.append(label, input);
  return l;
}

export function readDraft(form: HTMLFormElement, base: SteerRequest): SteerRequest {
  const v = (name: string) => (form.elements.namedItem(name) as HTMLInputElement).value;
  const num = (name: string) => Number(v(name));
  const seed = v("seed").trim();
  const keywords = v("keywords").trim();
  return {
    ...base,
    prompt: v("prompt"),
    pair: { p_plus: v("p_plus"), p_minus: v("p_minus") },
    layer: num("layer"),
    coefficient: num("coefficient"),
    alignment: num("alignment"),
    n_completions: num("n_completions"),
    params: { ...base.params, ...(seed ? { seed: Number(seed) } : {}) },
    ...(keywords ? { keywords: keywords.split(",").map((k) => k.trim()) } : {}),
  };
}

function writeDraft(form: HTMLFormElement, d: SteerRequest): void {
  const set = (name: string, value: unknown) => {
    (form.elements.namedItem(name) as HTMLInputElement).value = value === undefined ? "" : String(value);
  };
  set("prompt", d.prompt);
  set("p_plus", d.pair.p_plus);
  set("p_minus", d.pair.p_minus);
  set("layer", d.layer);
  set("coefficient", d.coefficient);
  set("alignment", d.alignment ?? 1);
  set("n_completions", d.n_completions ?? 1);
  set("seed", d.params?.seed);
  set("keywords", d.keywords?.join(", "));
}

export interface Playground {
  session: SessionState;
  steer(): Promise<void>;
  sweep(axis: SweepAxis, values: number[]): Promise<void>;
}

/** Build the playground inside `root`. */
export async function mountPlayground(root: HTMLElement, client: ApiClient, storage: StorageLike): Promise<Playground> {
  const doc = root.ownerDocument;
  let model: ModelInfo | undefined;
  try {
    model = (await client.model()).report;
  } catch (e) {
    root.append(renderError(doc, e as ApiError));
  }
  const hash = model?.model_hash ?? "offline";
  const session = SessionState.load(storage, hash);
  const controller = new SteerController(client, session);

  const title = doc.createElement("h1");
  title.textContent = model ? `Steering playground: ${model.model} (${model.config.n_layers} layers)` : "Steering playground";
  const form = doc.createElement("form");
  form.className = "draft";
  const d = session.draft;
  form.append(
    field(doc, "Prompt", "prompt", d.prompt),
    field(doc, "p+", "p_plus", d.pair.p_plus),
    field(doc, "p-", "p_minus", d.pair.p_minus),
    field(doc, "Layer", "layer", String(d.layer), "number"),
    field(doc, "Coefficient", "coefficient", String(d.coefficient), "number"),
    field(doc, "Alignment", "alignment", String(d.alignment ?? 1), "number"),
    field(doc, "Completions", "n_completions", String(d.n_completions ?? 1), "number"),
    field(doc, "Seed", "seed", d.params?.seed === undefined ? "" : String(d.params.seed), "number"),
    field(doc, "Keywords", "keywords", d.keywords?.join(", ") ?? ""),
  );
  const steerButton = doc.createElement("button");
  steerButton.type = "submit";
  steerButton.textContent = "Steer";
  form.append(steerButton);

  const result = doc.createElement("div");
  result.className = "result";
  const history = doc.createElement("ol");
  history.className = "history";
  const sweepArea = doc.createElement("div");
  sweepArea.className = "sweep-area";

  const renderHistory = () => {
    history.replaceChildren(
      ...[...session.history].reverse().map((e) => {
        const li = doc.createElement("li");
        const r = e.response.report;
        li.textContent = `#${e.id} layer ${r.vector.spec.layer}, c = ${r.vector.spec.coefficient}, seed ${e.seed}, fraction ${r.scores.steered.fraction} `;
        const pin = doc.createElement("button");
        pin.type = "button";
        const pinned = session.pinned.some((p) => p.id === e.id);
        pin.textContent = pinned ? "unpin" : "pin";
        pin.onclick = () => {
          if (pinned) session.unpin(e.id);
          else session.pin(e.id);
          session.save(storage, hash);
          renderHistory();
        };
        const replay = doc.createElement("button");
        replay.type = "button";
        replay.textContent = "replay";
        replay.onclick = () => {
          session.draft = session.replayRequest(e);
          writeDraft(form, session.draft);
          void pg.steer();
        };
        const show = doc.createElement("button");
        show.type = "button";
        show.textContent = "show";
        show.onclick = () => result.replaceChildren(renderComparison({ ok: true, response: e.response }, doc));
        li.append(pin, replay, show);
        if (pinned) li.classList.add("pinned");
        return li;
      }),
    );
  };

  const pg: Playground = {
    session,
    async steer() {
      session.draft = readDraft(form, session.draft);
      session.save(storage, hash);
      steerButton.disabled = true;
      const outcome = await controller.submit(session.draft);
      steerButton.disabled = false;
      if ("stale" in outcome) return;
      result.replaceChildren(renderComparison(outcome, doc));
      if (outcome.ok) {
        session.save(storage, hash);
        renderHistory();
      }
    },
    async sweep(axis, values) {
      session.draft = readDraft(form, session.draft);
      let panel;
      try {
        panel = sweepPanel(session.draft, axis, values, {
          client,
          model,
          doc,
          onAdopt: (next) => {
            session.draft = next;
            writeDraft(form, next);
            session.save(storage, hash);
          },
        });
      } catch (e) {
        const p = doc.createElement("p");
        p.className = "error";
        p.textContent = (e as Error).message;
        sweepArea.replaceChildren(p);
        return;
      }
      sweepArea.replaceChildren(panel.element);
      await panel.done;
    },
  };

  const sweepForm = doc.createElement("form");
  sweepForm.className = "sweep-form";
  const axis = doc.createElement("select");
  axis.name = "axis";
  for (const a of ["layer", "coefficient"]) axis.append(new Option(a, a));
  sweepForm.append(
    axis,
    field(doc, "Values", "values", model ? Array.from({ length: model.config.n_layers }, (_, i) => i).join(",") : "0,1,2"),
  );
  const sweepButton = doc.createElement("button");
  sweepButton.type = "submit";
  sweepButton.textContent = "Sweep";
  sweepForm.append(sweepButton);

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void pg.steer();
  });
  sweepForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const raw = (sweepForm.elements.namedItem("values") as HTMLInputElement).value;
    void pg.sweep(axis.value as SweepAxis, raw.split(",").map((s) => Number(s.trim())));
  });

  root.append(title, form, result, sweepForm, sweepArea, history);
  renderHistory();
  return pg;
}
