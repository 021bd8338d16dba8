import { ApiClient } from './api';
import { renderItemCard } from './cards';
import { mapActionToView, questionText, type QuestionViewModel } from './views';
import type { AnswerValue, CatalogAttribute, PendingAction, SessionCreated } from './types';

export type Page = 'description' | 'question' | 'outcome';

const CANDIDATE_PREVIEW = 12;

/** One-session wizard: description page, then one question per page with
 * forward-only navigation, then the outcome page. All dialog state lives on
 * the server; the app only renders payloads and posts answers. */
export class SessionApp {
  page: Page = 'description';
  questionPages = 0;
  session: SessionCreated | null = null;
  private pendingValue: AnswerValue | null = null;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private mode: string = 'human',
  ) {}

  async start(seed?: number): Promise<void> {
    this.session = await this.api.createSession(this.mode, seed);
    this.renderDescriptionPage();
  }

  private clear(): HTMLElement {
    this.root.innerHTML = '';
    const page = document.createElement('section');
    page.className = 'page';
    this.root.appendChild(page);
    return page;
  }

  // ----- description page --------------------------------------------------

  private renderDescriptionPage(): void {
    const session = this.session!;
    this.page = 'description';
    const page = this.clear();
    page.dataset.testid = 'description-page';

    const heading = document.createElement('h2');
    heading.textContent = 'Describe the item you are looking for';
    page.appendChild(heading);
    page.appendChild(renderItemCard(session.target_card, { label: 'your target' }));

    const search = document.createElement('input');
    search.type = 'search';
    search.placeholder = 'filter attributes';
    search.dataset.testid = 'attribute-search';
    page.appendChild(search);

    const list = document.createElement('div');
    list.className = 'attribute-list';
    page.appendChild(list);

    const submit = document.createElement('button');
    submit.textContent = 'Start the dialog';
    submit.dataset.testid = 'submit-description';
    submit.disabled = true;
    page.appendChild(submit);

    const checked = new Set<number>();
    const renderList = () => {
      const needle = search.value.toLowerCase();
      list.innerHTML = '';
      for (const attr of session.catalog) {
        if (needle && !attr.name.toLowerCase().includes(needle)) continue;
        list.appendChild(this.attributeRow(attr, checked, () => {
          submit.disabled = checked.size === 0;
        }));
      }
    };
    search.addEventListener('input', renderList);
    renderList();

    submit.addEventListener('click', () => {
      void this.submitDescription([...checked].sort((a, b) => a - b));
    });
  }

  private attributeRow(attr: CatalogAttribute, checked: Set<number>,
                       onChange: () => void): HTMLElement {
    const row = document.createElement('label');
    row.className = 'attribute-row';
    const box = document.createElement('input');
    box.type = 'checkbox';
    box.value = String(attr.index);
    box.checked = checked.has(attr.index);
    box.addEventListener('change', () => {
      if (box.checked) checked.add(attr.index);
      else checked.delete(attr.index);
      onChange();
    });
    row.appendChild(box);
    const text = document.createElement('span');
    text.textContent = attr.name;
    row.appendChild(text);
    return row;
  }

  async submitDescription(attributes: number[]): Promise<void> {
    const ack = await this.api.postDescription(this.session!.session_id, attributes);
    this.showAction(ack.action);
  }

  // ----- question pages ------------------------------------------------------

  private showAction(payload: PendingAction): void {
    const view = mapActionToView(payload);
    if (view.kind === 'guess') {
      this.renderOutcomePage(view);
    } else {
      this.renderQuestionPage(view);
    }
  }

  private renderQuestionPage(view: QuestionViewModel): void {
    this.page = 'question';
    this.questionPages += 1;
    this.pendingValue = null;
    const page = this.clear();
    page.dataset.testid = 'question-page';
    page.dataset.kind = view.kind;

    const counter = document.createElement('p');
    counter.className = 'page-counter';
    counter.textContent = `question ${this.questionPages}`;
    page.appendChild(counter);

    const heading = document.createElement('h2');
    heading.textContent = questionText(view);
    page.appendChild(heading);

    if (view.exampleItems.length > 0) {
      const strip = document.createElement('div');
      strip.className = 'example-strip';
      strip.dataset.testid = 'example-strip';
      const note = document.createElement('p');
      note.textContent = `examples of "${view.attributeName}"`;
      page.appendChild(note);
      for (const id of view.exampleItems) {
        void this.appendCard(strip, id, { attributeChip: view.attributeName });
      }
      page.appendChild(strip);
    }

    if (view.kind === 'label_query' && view.subjectItem !== undefined) {
      const holder = document.createElement('div');
      holder.dataset.testid = 'subject-item';
      void this.appendCard(holder, view.subjectItem, { label: 'the item in question' });
      page.appendChild(holder);
    }

    const submit = document.createElement('button');
    submit.textContent = 'Submit answer';
    submit.dataset.testid = 'submit-answer';
    submit.disabled = true;

    const controls = document.createElement('div');
    controls.className = 'answer-controls';
    if (view.allowedAnswers.includes('yes')) {
      controls.appendChild(this.choiceButton('yes', submit));
      controls.appendChild(this.choiceButton('no', submit));
    }
    if (view.allowedAnswers.includes('pick-an-item')) {
      controls.appendChild(this.candidatePicker(view, submit));
      controls.appendChild(this.choiceButton('none', submit));
    }
    page.appendChild(controls);
    page.appendChild(submit);

    const errorBox = document.createElement('p');
    errorBox.className = 'error';
    errorBox.dataset.testid = 'error';
    errorBox.hidden = true;
    page.appendChild(errorBox);

    submit.addEventListener('click', () => {
      void this.submitAnswer(submit, errorBox);
    });
  }

  private choiceButton(value: 'yes' | 'no' | 'none', submit: HTMLButtonElement): HTMLElement {
    const button = document.createElement('button');
    button.textContent = value;
    button.dataset.answer = value;
    button.addEventListener('click', () => {
      this.pendingValue = value;
      submit.disabled = false;
      button.parentElement?.querySelectorAll('button, select').forEach((el) => {
        el.classList.toggle('selected', el === button);
      });
    });
    return button;
  }

  private candidatePicker(view: QuestionViewModel, submit: HTMLButtonElement): HTMLElement {
    const wrap = document.createElement('div');
    wrap.className = 'candidate-picker';

    const select = document.createElement('select');
    select.dataset.testid = 'candidate-select';
    const placeholder = document.createElement('option');
    placeholder.value = '';
    placeholder.textContent = 'pick an item id...';
    select.appendChild(placeholder);
    for (const id of view.candidateItems) {
      const option = document.createElement('option');
      option.value = String(id);
      option.textContent = `item ${id}`;
      select.appendChild(option);
    }
    select.addEventListener('change', () => {
      if (select.value !== '') {
        this.pendingValue = Number(select.value);
        submit.disabled = false;
      }
    });
    wrap.appendChild(select);

    const grid = document.createElement('div');
    grid.className = 'candidate-grid';
    for (const id of view.candidateItems.slice(0, CANDIDATE_PREVIEW)) {
      void this.appendCard(grid, id).then((card) => {
        card.addEventListener('click', () => {
          this.pendingValue = id;
          select.value = String(id);
          submit.disabled = false;
        });
      });
    }
    wrap.appendChild(grid);
    return wrap;
  }

  private async appendCard(parent: HTMLElement, itemId: number,
                           options: Parameters<typeof renderItemCard>[1] = {}):
      Promise<HTMLElement> {
    const data = await this.api.itemCard(itemId);
    const card = renderItemCard(data, options);
    parent.appendChild(card);
    return card;
  }

  async submitAnswer(submit: HTMLButtonElement, errorBox: HTMLElement): Promise<void> {
    if (this.pendingValue === null) return;
    submit.disabled = true;
    try {
      const result = await this.api.postAnswer(this.session!.session_id, this.pendingValue);
      if (result.done && result.outcome) {
        this.showAction(result.outcome);
      } else {
        const action = await this.api.nextAction(this.session!.session_id);
        this.showAction(action);
      }
    } catch (err) {
      // the pending question is untouched server-side (next is idempotent):
      // surface the error and let the user resubmit
      errorBox.hidden = false;
      errorBox.textContent = err instanceof Error ? err.message : String(err);
      submit.disabled = false;
    }
  }

  // ----- outcome page ----------------------------------------------------------

  private renderOutcomePage(view: QuestionViewModel): void {
    this.page = 'outcome';
    const page = this.clear();
    page.dataset.testid = 'outcome-page';
    const outcome = view.outcome!;

    const heading = document.createElement('h2');
    heading.textContent = outcome.correct
      ? 'Found it! The guess matches your target.'
      : 'The guess missed your target.';
    heading.dataset.correct = String(outcome.correct);
    page.appendChild(heading);

    const pair = document.createElement('div');
    pair.className = 'outcome-pair';
    void this.appendCard(pair, outcome.guessedItem, { label: 'system guess' });
    if (outcome.targetItem !== outcome.guessedItem) {
      void this.appendCard(pair, outcome.targetItem, { label: 'your target' });
    }
    page.appendChild(pair);
  }
}
