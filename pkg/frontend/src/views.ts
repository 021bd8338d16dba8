import type { ActionKind, PendingAction } from './types';

export type AnswerControl = 'yes' | 'no' | 'pick-an-item' | 'none';

export interface QuestionViewModel {
  kind: ActionKind;
  attribute?: number;
  attributeName?: string;
  /** item the question is about (label queries only) */
  subjectItem?: number;
  /** up to three catalog example items illustrating the attribute */
  exampleItems: number[];
  /** pool the user may pick an example from (example queries only) */
  candidateItems: number[];
  allowedAnswers: AnswerControl[];
  outcome?: { guessedItem: number; correct: boolean; targetItem: number };
}

const QUESTION_KINDS: ActionKind[] = ['clarify', 'label_query', 'example_query'];

/** Lossless mapping from a pending-action payload to what a page renders.
 * Guess payloads become the outcome view with no answer controls. */
export function mapActionToView(payload: PendingAction): QuestionViewModel {
  if (payload.type === 'guess') {
    if (payload.guessed_item === undefined || payload.correct === undefined
        || payload.target_item === undefined) {
      throw new Error('malformed outcome payload');
    }
    return {
      kind: 'guess',
      exampleItems: [],
      candidateItems: [],
      allowedAnswers: [],
      outcome: {
        guessedItem: payload.guessed_item,
        correct: payload.correct,
        targetItem: payload.target_item,
      },
    };
  }
  if (!QUESTION_KINDS.includes(payload.type)) {
    throw new Error(`unknown action kind ${JSON.stringify(payload.type)}`);
  }
  if (payload.attribute === undefined) {
    throw new Error('question payload without an attribute');
  }
  const examples = (payload.example_item_ids ?? []).slice(0, 3);
  if (payload.type === 'example_query') {
    return {
      kind: payload.type,
      attribute: payload.attribute,
      attributeName: payload.attribute_name,
      exampleItems: examples,
      candidateItems: payload.candidate_item_ids ?? [],
      allowedAnswers: ['pick-an-item', 'none'],
    };
  }
  return {
    kind: payload.type,
    attribute: payload.attribute,
    attributeName: payload.attribute_name,
    subjectItem: payload.type === 'label_query' ? payload.item : undefined,
    exampleItems: examples,
    candidateItems: [],
    allowedAnswers: ['yes', 'no'],
  };
}

export function questionText(view: QuestionViewModel): string {
  const name = view.attributeName ?? `attribute ${view.attribute}`;
  switch (view.kind) {
    case 'clarify':
      return `Does "${name}" apply to the item you are looking for?`;
    case 'label_query':
      return `Does "${name}" apply to the item shown below?`;
    case 'example_query':
      return `Pick an item that has "${name}" (or say none have it).`;
    default:
      return 'The system made its guess.';
  }
}
