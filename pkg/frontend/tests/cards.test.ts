// @vitest-environment jsdom
import { describe, expect, it } from 'vitest';

import { cardPalette, renderItemCard } from '../src/cards';

const data = { id: 41, render_seed: 0xbeef, sparkline: [0.1, -0.2, 0.4, 0.0] };

describe('renderItemCard', () => {
  it('is a pure function of the card payload', () => {
    const a = renderItemCard(data).outerHTML;
    const b = renderItemCard({ ...data }).outerHTML;
    expect(a).toBe(b);
    const other = renderItemCard({ ...data, render_seed: 123 }).outerHTML;
    expect(other).not.toBe(a);
  });

  it('shows the attribute chip only when asked for', () => {
    const plain = renderItemCard(data);
    expect(plain.querySelector('.attribute-chip')).toBeNull();
    const chip = renderItemCard(data, { attributeChip: 'striped' });
    expect(chip.querySelector('.attribute-chip')?.textContent).toBe('striped');
  });

  it('never embeds anything except the payload fields', () => {
    const html = renderItemCard(data, { label: 'item 41' }).outerHTML;
    expect(html).not.toContain('label_');
    expect(html).not.toContain('labels');
  });

  it('derives a stable palette from the seed', () => {
    expect(cardPalette(7)).toEqual(cardPalette(7));
    expect(cardPalette(7)).not.toEqual(cardPalette(8));
  });
});
