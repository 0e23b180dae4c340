/**
 * Trial conductor: three-step flow against the session service.
 *
 *   1. setup      - design form (kind, target, interval / skeleton, cohort)
 *   2. conduct    - per-cohort outcome toggles + recommendation panel
 *   3. summary    - recommended MTD after closing the session
 *
 * The UI holds no dose-decision logic; every recommendation shown is the
 * verbatim response of the service.
 */

import {
  ApiError,
  TrialClient,
  type DesignKind,
  type DesignSpecInput,
  type LevelRow,
  type SessionView,
} from './api.js';
import { renderChart } from './chart.js';

interface AppState {
  sessionId: string | null;
  view: SessionView | null;
  toggles: boolean[];
  lastDose: number | null;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: Array<Node | string> = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  for (const child of children) node.append(child);
  return node;
}

function arrowFor(reason: string): string {
  if (reason.includes('de-escalate')) return '↓';
  if (reason.includes('escalate')) return '↑';
  return '→';
}

export class TrialApp {
  private readonly state: AppState = {
    sessionId: null,
    view: null,
    toggles: [],
    lastDose: null,
  };

  constructor(
    private readonly root: HTMLElement,
    private readonly client: TrialClient,
  ) {}

  async start(): Promise<void> {
    // recover an in-flight session across reloads; the server is the
    // source of truth, so a stale or deleted id just falls back to setup
    const stored = window.sessionStorage.getItem('dosefind-session');
    if (stored) {
      try {
        this.state.view = await this.client.getSession(stored);
        this.state.sessionId = stored;
        this.renderConduct();
        return;
      } catch {
        window.sessionStorage.removeItem('dosefind-session');
      }
    }
    this.renderSetup();
  }

  private renderSetup(): void {
    this.root.replaceChildren();
    const form = el('form', { id: 'setup-form', class: 'panel' });
    form.append(
      el('h2', {}, ['New trial']),
      labelled('Design', select('kind', ['interval', 'point', 'crm'])),
      labelled('Dose levels (m)', numberInput('m', '5', '2', '1')),
      labelled('Target rate p', numberInput('p', '0.3', '0.01', '0.01')),
      labelled('Band below target (dp1)', numberInput('dp1', '0.1', '0.01', '0.01')),
      labelled('Band above target (dp2)', numberInput('dp2', '0.1', '0.01', '0.01')),
      labelled('Skeleton (CRM, comma-separated)', textInput('skeleton', '')),
      labelled('Cohort size', numberInput('cohort', '3', '1', '1')),
      labelled('Start level', numberInput('start', '1', '1', '1')),
      el('button', { type: 'submit', id: 'create-btn' }, ['Start trial']),
      el('p', { id: 'setup-error', class: 'error', role: 'alert' }),
    );
    form.addEventListener('submit', (ev) => {
      ev.preventDefault();
      void this.createSession(form);
    });
    this.root.append(form);
  }

  private async createSession(form: HTMLFormElement): Promise<void> {
    const data = new FormData(form);
    const kind = data.get('kind') as DesignKind;
    const spec: DesignSpecInput = {
      kind,
      m: Number(data.get('m')),
      p: Number(data.get('p')),
      cohort: Number(data.get('cohort')),
      start: Number(data.get('start')),
    };
    if (kind === 'interval') {
      spec.dp1 = Number(data.get('dp1'));
      spec.dp2 = Number(data.get('dp2'));
    }
    const skeletonText = String(data.get('skeleton') ?? '').trim();
    if (kind === 'crm' && skeletonText) {
      spec.skeleton = skeletonText.split(',').map((tok) => Number(tok.trim()));
    }
    try {
      const created = await this.client.createSession(spec);
      this.state.sessionId = created.id;
      window.sessionStorage.setItem('dosefind-session', created.id);
      this.state.view = await this.client.getSession(created.id);
      this.renderConduct();
    } catch (err) {
      this.showError('setup-error', err);
    }
  }

  private renderConduct(): void {
    const view = this.state.view;
    if (!view) return;
    this.root.replaceChildren();
    this.state.toggles = new Array<boolean>(view.spec.cohort).fill(false);
    this.state.lastDose = view.next_dose;

    const panel = el('div', { class: 'panel', id: 'conduct-panel' });
    panel.append(
      el('h2', {}, [`Trial ${view.id.slice(0, 8)} (${view.spec.kind}, p=${view.spec.p})`]),
      this.recommendationBlock(view.next_dose, view.decision_reason),
      this.outcomeEntry(view),
      this.levelTable(view.levels),
      this.chartBlock(view.levels, view),
      this.historyBlock(view),
      el('button', { id: 'close-btn', type: 'button' }, ['Close trial']),
      el('p', { id: 'conduct-error', class: 'error', role: 'alert' }),
    );
    panel.querySelector('#close-btn')!.addEventListener('click', () => void this.closeTrial());
    this.root.append(panel);
  }

  private recommendationBlock(dose: number, reason: string): HTMLElement {
    return el('div', { class: 'recommendation', id: 'recommendation' }, [
      el('span', { class: 'arrow', id: 'move-arrow' }, [arrowFor(reason)]),
      el('strong', { id: 'next-dose' }, [`Next dose: level ${dose}`]),
      el('p', { id: 'decision-reason' }, [reason]),
    ]);
  }

  private outcomeEntry(view: SessionView): HTMLElement {
    const box = el('fieldset', { class: 'outcome-entry' });
    box.append(el('legend', {}, [
      `Cohort outcomes at level ${view.next_dose} (toggle toxicities)`,
    ]));
    for (let i = 0; i < view.spec.cohort; i++) {
      const btn = el('button', {
        type: 'button',
        class: 'toggle',
        id: `subject-${i}`,
        'aria-pressed': 'false',
      }, [`subject ${i + 1}: no DLT`]);
      btn.addEventListener('click', () => {
        this.state.toggles[i] = !this.state.toggles[i];
        btn.setAttribute('aria-pressed', String(this.state.toggles[i]));
        btn.textContent = `subject ${i + 1}: ${this.state.toggles[i] ? 'DLT' : 'no DLT'}`;
      });
      box.append(btn);
    }
    const submit = el('button', { type: 'button', id: 'submit-cohort' }, ['Record cohort']);
    submit.addEventListener('click', () => void this.submitCohort());
    box.append(submit);
    return box;
  }

  private async submitCohort(): Promise<void> {
    const { sessionId, view } = this.state;
    if (!sessionId || !view) return;
    const outcomes = this.state.toggles.map((t) => (t ? 1 : 0));
    try {
      await this.client.submitOutcomes(sessionId, view.next_dose, outcomes);
      // re-fetch rather than trusting our local merge
      this.state.view = await this.client.getSession(sessionId);
      this.renderConduct();
    } catch (err) {
      this.showError('conduct-error', err);
    }
  }

  private levelTable(levels: LevelRow[]): HTMLElement {
    const table = el('table', { id: 'level-table' });
    const header = el('tr', {});
    for (const name of ['level', 'n', 'tox', 'raw', 'isotonic']) {
      header.append(el('th', {}, [name]));
    }
    table.append(header);
    for (const row of levels) {
      const tr = el('tr', { 'data-level': String(row.level) });
      tr.append(
        el('td', {}, [`d${row.level}`]),
        el('td', {}, [String(row.n)]),
        el('td', {}, [String(row.tox)]),
        el('td', { class: 'raw' }, [row.raw_ratio ?? '-']),
        el('td', {}, [row.monotonized == null ? '-' : row.monotonized.toFixed(3)]),
      );
      table.append(tr);
    }
    return table;
  }

  private chartBlock(levels: LevelRow[], view: SessionView): HTMLElement {
    const holder = el('div', { id: 'chart-holder' });
    holder.append(renderChart(levels, { p: view.spec.p, band: view.band }));
    return holder;
  }

  private historyBlock(view: SessionView): HTMLElement {
    const list = el('ol', { id: 'history' });
    for (const entry of view.audit) {
      list.append(el('li', {}, [
        `dose ${entry.dose}: [${entry.outcomes.join(', ')}]`,
      ]));
    }
    return el('details', {}, [el('summary', {}, ['Cohort history']), list]);
  }

  private async closeTrial(): Promise<void> {
    const { sessionId } = this.state;
    if (!sessionId) return;
    try {
      const closed = await this.client.closeSession(sessionId);
      window.sessionStorage.removeItem('dosefind-session');
      this.root.replaceChildren(
        el('div', { class: 'panel', id: 'summary-panel' }, [
          el('h2', {}, ['Trial closed']),
          el('strong', { id: 'final-mtd' }, [`Recommended MTD: level ${closed.recommended_mtd}`]),
        ]),
      );
    } catch (err) {
      this.showError('conduct-error', err);
    }
  }

  private showError(slot: string, err: unknown): void {
    const node = document.getElementById(slot);
    if (!node) return;
    node.textContent = err instanceof ApiError ? err.message : String(err);
  }
}

function labelled(text: string, input: HTMLElement): HTMLElement {
  return el('label', { class: 'field' }, [text, input]);
}

function select(name: string, options: string[]): HTMLSelectElement {
  const node = el('select', { name, id: `field-${name}` });
  for (const opt of options) node.append(el('option', { value: opt }, [opt]));
  return node;
}

function numberInput(name: string, value: string, min: string, step: string): HTMLInputElement {
  return el('input', { type: 'number', name, id: `field-${name}`, value, min, step });
}

function textInput(name: string, value: string): HTMLInputElement {
  return el('input', { type: 'text', name, id: `field-${name}`, value });
}

export function mount(root: HTMLElement, baseUrl = ''): TrialApp {
  const app = new TrialApp(root, new TrialClient(baseUrl));
  void app.start();
  return app;
}
