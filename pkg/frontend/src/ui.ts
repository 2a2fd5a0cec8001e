import { ApiClient, ApiError } from "./api.js";
import {
  ALL_BINS,
  BinName,
  DESTINATION_BINS,
  HUMAN_REACH,
  HumanView,
  TurnView,
} from "./types.js";

const BIN_LABELS: Record<BinName, string> = {
  top_left: "Top left",
  top_right: "Top right",
  bottom_left: "Bottom left",
  bottom_right: "Bottom right",
  area_p1: "Your area",
  area_p2: "Partner's area",
  common: "Common",
};

/** The whole client: renders the board, constraint and ask panels, the
 * history pane and the end-of-game survey, and posts actions to the service.
 * The server stays authoritative; the only local logic is graying out bins
 * the human cannot reach. */
export class GameUI {
  view: HumanView | null = null;
  history: TurnView[] = [];
  selected: string | null = null;
  busy = false;
  message = "";
  private unsubscribe: () => void = () => {};

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  async start(participantId: string, gameListId = "default"): Promise<void> {
    this.view = await this.api.createSession(participantId, gameListId);
    this.history = [];
    this.unsubscribe = this.api.subscribe(this.view.session_id, () => {
      void this.refresh();
    });
    this.render();
  }

  stop(): void {
    this.unsubscribe();
  }

  async refresh(): Promise<void> {
    if (!this.view) return;
    const id = this.view.session_id;
    this.view = await this.api.getState(id);
    this.history = (await this.api.getHistory(id)).history;
    this.render();
  }

  get myTurn(): boolean {
    return (
      this.view !== null &&
      this.view.status === "running" &&
      this.view.turn === "p1" &&
      !this.busy
    );
  }

  private async submit(action: string): Promise<void> {
    if (!this.view || !this.myTurn) return;
    this.busy = true;
    this.render();
    try {
      const res = await this.api.submitAction(this.view.session_id, action);
      this.view = res.state;
      this.history = (await this.api.getHistory(this.view.session_id)).history;
      this.selected = null;
      this.setMessage("");
    } catch (err) {
      if (err instanceof ApiError) {
        this.setMessage(err.detail);
      } else {
        throw err;
      }
    } finally {
      this.busy = false;
      this.render();
    }
  }

  clickObject(obj: string): void {
    if (!this.view || !this.myTurn) return;
    const bin = this.view.board[obj];
    if (bin === undefined || !HUMAN_REACH.has(bin)) return;
    if (DESTINATION_BINS.includes(bin)) return; // placed objects are locked
    this.selected = this.selected === obj ? null : obj;
    this.render();
  }

  clickBin(bin: BinName): Promise<void> {
    if (!this.view || !this.selected || !HUMAN_REACH.has(bin)) {
      return Promise.resolve();
    }
    const src = this.view.board[this.selected];
    if (src === undefined || src === bin) return Promise.resolve();
    return this.submit(`move(${this.selected}, ${src}, ${bin})`);
  }

  share(constraint: string): Promise<void> {
    return this.submit(`share(${constraint})`);
  }

  ask(obj: string): Promise<void> {
    return this.submit(`ask(${obj})`);
  }

  skip(): Promise<void> {
    return this.submit("pass");
  }

  async submitSurvey(answers: number[]): Promise<void> {
    if (!this.view) return;
    const res = await this.api.submitFeedback(this.view.session_id, answers);
    this.view = res.state;
    this.history = this.view.complete
      ? this.history
      : (await this.api.getHistory(this.view.session_id)).history;
    if (!this.view.complete) this.history = [];
    this.selected = null;
    this.render();
  }

  get surveyDue(): boolean {
    return this.view !== null && this.view.status !== "running" && !this.view.complete;
  }

  private setMessage(text: string): void {
    this.message = text;
    const node = this.root.querySelector("[data-message]");
    if (node) node.textContent = text;
  }

  render(): void {
    const view = this.view;
    if (!view) return;
    this.root.innerHTML = "";
    this.root.appendChild(this.renderHeader(view));
    this.root.appendChild(this.renderBoard(view));
    this.root.appendChild(this.renderConstraints(view));
    this.root.appendChild(this.renderAskPanel(view));
    this.root.appendChild(this.renderControls());
    this.root.appendChild(this.renderHistory());
    const message = document.createElement("p");
    message.setAttribute("data-message", "");
    message.textContent = this.message;
    this.root.appendChild(message);
    if (view.complete) {
      const done = document.createElement("p");
      done.setAttribute("data-complete", "");
      done.textContent = "All games finished. Thank you for participating!";
      this.root.appendChild(done);
    } else if (this.surveyDue) {
      this.root.appendChild(this.renderSurvey(view));
    }
  }

  private renderHeader(view: HumanView): HTMLElement {
    const header = document.createElement("header");
    const title = document.createElement("h1");
    title.textContent = view.practice
      ? `Practice game (${view.game_index + 1} of ${view.game_count})`
      : `Game ${view.game_index + 1} of ${view.game_count}`;
    header.appendChild(title);
    const steps = document.createElement("span");
    steps.setAttribute("data-steps", "");
    steps.textContent = `Step ${view.step_count}/${view.step_limit}`;
    header.appendChild(steps);
    const turn = document.createElement("span");
    turn.setAttribute("data-turn", "");
    turn.textContent =
      view.status !== "running"
        ? view.status === "solved"
          ? "Solved!"
          : "Out of steps"
        : view.turn === "p1"
          ? "Your turn"
          : "Bot is thinking";
    header.appendChild(turn);
    if (view.pending_ask && view.pending_ask.asker === "p2") {
      const ask = document.createElement("span");
      ask.setAttribute("data-pending-ask", "");
      ask.textContent = `The bot asked about ${view.pending_ask.object}`;
      header.appendChild(ask);
    }
    return header;
  }

  private renderBoard(view: HumanView): HTMLElement {
    const board = document.createElement("section");
    board.setAttribute("data-board", "");
    for (const bin of ALL_BINS) {
      const zone = document.createElement("div");
      zone.setAttribute("data-bin", bin);
      zone.className = HUMAN_REACH.has(bin) ? "zone" : "zone unreachable";
      const label = document.createElement("h2");
      label.textContent = BIN_LABELS[bin];
      zone.appendChild(label);
      for (const obj of view.objects) {
        if (view.board[obj] !== bin) continue;
        const chip = document.createElement("button");
        chip.setAttribute("data-object", obj);
        chip.textContent = obj;
        chip.className = this.selected === obj ? "object selected" : "object";
        chip.disabled =
          !this.myTurn ||
          !HUMAN_REACH.has(bin) ||
          DESTINATION_BINS.includes(bin);
        chip.addEventListener("click", () => this.clickObject(obj));
        zone.appendChild(chip);
      }
      zone.addEventListener("click", (event) => {
        if (event.target === zone || event.target === label) {
          void this.clickBin(bin);
        }
      });
      board.appendChild(zone);
    }
    return board;
  }

  private renderConstraints(view: HumanView): HTMLElement {
    const panel = document.createElement("section");
    panel.setAttribute("data-constraints", "");
    const heading = document.createElement("h2");
    heading.textContent = "Your rules";
    panel.appendChild(heading);
    for (const constraint of view.your_constraints) {
      const row = document.createElement("div");
      const text = document.createElement("span");
      text.textContent = constraint;
      row.appendChild(text);
      const button = document.createElement("button");
      button.setAttribute("data-share", constraint);
      button.textContent = "Share";
      button.disabled = !this.myTurn;
      button.addEventListener("click", () => void this.share(constraint));
      row.appendChild(button);
      panel.appendChild(row);
    }
    return panel;
  }

  private renderAskPanel(view: HumanView): HTMLElement {
    const panel = document.createElement("section");
    panel.setAttribute("data-ask-panel", "");
    const heading = document.createElement("h2");
    heading.textContent = "Ask about an object";
    panel.appendChild(heading);
    for (const obj of view.objects) {
      const bin = view.board[obj];
      if (bin !== undefined && DESTINATION_BINS.includes(bin)) continue;
      const button = document.createElement("button");
      button.setAttribute("data-ask", obj);
      button.textContent = `Ask about ${obj}`;
      button.disabled = !this.myTurn;
      button.addEventListener("click", () => void this.ask(obj));
      panel.appendChild(button);
    }
    return panel;
  }

  private renderControls(): HTMLElement {
    const controls = document.createElement("section");
    const skip = document.createElement("button");
    skip.setAttribute("data-skip", "");
    skip.textContent = "Skip";
    skip.disabled = !this.myTurn;
    skip.addEventListener("click", () => void this.skip());
    controls.appendChild(skip);
    return controls;
  }

  private renderHistory(): HTMLElement {
    const section = document.createElement("section");
    const heading = document.createElement("h2");
    heading.textContent = "History";
    section.appendChild(heading);
    const list = document.createElement("ol");
    list.setAttribute("data-history", "");
    for (const turn of this.history) {
      const item = document.createElement("li");
      item.setAttribute("data-history-entry", String(turn.index));
      const who = turn.actor === "p1" ? "You" : "Bot";
      item.textContent = `${who}: ${turn.action} (${turn.outcome})`;
      list.appendChild(item);
    }
    section.appendChild(list);
    return section;
  }

  private renderSurvey(view: HumanView): HTMLElement {
    const modal = document.createElement("div");
    modal.setAttribute("data-survey", "");
    const heading = document.createElement("h2");
    heading.textContent = "Before the next game";
    modal.appendChild(heading);
    view.survey_questions.forEach((question, qi) => {
      const fieldset = document.createElement("fieldset");
      fieldset.setAttribute("data-survey-question", String(qi));
      const legend = document.createElement("legend");
      legend.textContent = question;
      fieldset.appendChild(legend);
      for (let value = 1; value <= 5; value++) {
        const label = document.createElement("label");
        const radio = document.createElement("input");
        radio.type = "radio";
        radio.name = `q${qi}`;
        radio.value = String(value);
        label.appendChild(radio);
        label.append(String(value));
        fieldset.appendChild(label);
      }
      modal.appendChild(fieldset);
    });
    const submit = document.createElement("button");
    submit.setAttribute("data-survey-submit", "");
    submit.textContent = "Submit and continue";
    submit.addEventListener("click", () => {
      const answers: number[] = [];
      view.survey_questions.forEach((_q, qi) => {
        const checked = modal.querySelector<HTMLInputElement>(
          `input[name="q${qi}"]:checked`,
        );
        if (checked) answers.push(Number(checked.value));
      });
      if (answers.length !== view.survey_questions.length) {
        this.setMessage("Please answer every question.");
        return;
      }
      void this.submitSurvey(answers);
    });
    modal.appendChild(submit);
    return modal;
  }
}
