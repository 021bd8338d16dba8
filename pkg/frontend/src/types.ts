// Wire types of the session service (see the service module's endpoint docs).

export type ActionKind = 'clarify' | 'label_query' | 'example_query' | 'guess';

export interface ItemCardData {
  id: number;
  render_seed: number;
  sparkline: number[];
}

export interface CatalogAttribute {
  index: number;
  name: string;
  example_item_ids: number[];
}

export interface SessionCreated {
  session_id: string;
  mode: string;
  target_item: number;
  target_card: ItemCardData;
  suggested_description: number[];
  catalog: CatalogAttribute[];
}

export interface PendingAction {
  type: ActionKind;
  attribute?: number;
  attribute_name?: string;
  item?: number;
  example_item_ids?: number[];
  candidate_item_ids?: number[];
  // outcome payload (type === 'guess')
  guessed_item?: number;
  correct?: boolean;
  target_item?: number;
}

export interface DescriptionAck {
  status: 'awaiting_answer' | 'finished';
  action: PendingAction;
}

export interface AnswerResult {
  done: boolean;
  outcome?: PendingAction;
}

export interface TranscriptStep {
  turn: number;
  action: { kind: ActionKind; attribute?: number; item?: number };
  answer: Record<string, unknown>;
  reward: number;
}

export type AnswerValue = 'yes' | 'no' | 'none' | number;
