import type { ItemCardData } from './types';

// Items are synthetic feature vectors, so cards are drawn procedurally: the
// server-provided render seed (a hash of the features, never of the labels)
// drives colors and shapes, and the sparkline shows the coarse feature
// profile. Identical data always renders identical markup.

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const SHAPES = ['circle', 'square', 'diamond', 'triangle'] as const;

export interface CardOptions {
  attributeChip?: string; // only for catalog example cards
  label?: string;         // caption under the card ("target", "guess", ...)
}

export function cardPalette(seed: number): { hue: number; shape: string; spots: number } {
  const rand = mulberry32(seed);
  return {
    hue: Math.floor(rand() * 360),
    shape: SHAPES[Math.floor(rand() * SHAPES.length)] as string,
    spots: 1 + Math.floor(rand() * 4),
  };
}

function sparklinePoints(sparkline: number[], width: number, height: number): string {
  if (sparkline.length === 0) return '';
  const lo = Math.min(...sparkline);
  const hi = Math.max(...sparkline);
  const span = hi - lo || 1;
  return sparkline
    .map((v, i) => {
      const x = (i / Math.max(sparkline.length - 1, 1)) * width;
      const y = height - ((v - lo) / span) * height;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(' ');
}

export function renderItemCard(data: ItemCardData, options: CardOptions = {}): HTMLElement {
  const { hue, shape, spots } = cardPalette(data.render_seed);
  const card = document.createElement('figure');
  card.className = 'item-card';
  card.dataset.itemId = String(data.id);

  const art = document.createElementNS('http://www.w3.org/2000/svg', 'svg');
  art.setAttribute('viewBox', '0 0 80 60');
  art.setAttribute('class', 'card-art');
  const bg = document.createElementNS('http://www.w3.org/2000/svg', 'rect');
  bg.setAttribute('width', '80');
  bg.setAttribute('height', '60');
  bg.setAttribute('fill', `hsl(${hue}, 45%, 88%)`);
  art.appendChild(bg);

  const rand = mulberry32(data.render_seed ^ 0x9e3779b9);
  for (let i = 0; i < spots; i += 1) {
    const cx = 12 + rand() * 56;
    const cy = 10 + rand() * 30;
    const size = 5 + rand() * 9;
    const fill = `hsl(${(hue + 120 * (i + 1)) % 360}, 55%, 55%)`;
    let node: SVGElement;
    if (shape === 'circle') {
      node = document.createElementNS('http://www.w3.org/2000/svg', 'circle');
      node.setAttribute('cx', cx.toFixed(1));
      node.setAttribute('cy', cy.toFixed(1));
      node.setAttribute('r', size.toFixed(1));
    } else if (shape === 'square') {
      node = document.createElementNS('http://www.w3.org/2000/svg', 'rect');
      node.setAttribute('x', (cx - size).toFixed(1));
      node.setAttribute('y', (cy - size).toFixed(1));
      node.setAttribute('width', (2 * size).toFixed(1));
      node.setAttribute('height', (2 * size).toFixed(1));
    } else {
      node = document.createElementNS('http://www.w3.org/2000/svg', 'polygon');
      const points = shape === 'diamond'
        ? `${cx},${cy - size} ${cx + size},${cy} ${cx},${cy + size} ${cx - size},${cy}`
        : `${cx},${cy - size} ${cx + size},${cy + size} ${cx - size},${cy + size}`;
      node.setAttribute('points', points);
    }
    node.setAttribute('fill', fill);
    art.appendChild(node);
  }

  const line = document.createElementNS('http://www.w3.org/2000/svg', 'polyline');
  line.setAttribute('points', sparklinePoints(data.sparkline, 80, 14));
  line.setAttribute('transform', 'translate(0, 44)');
  line.setAttribute('fill', 'none');
  line.setAttribute('stroke', `hsl(${hue}, 50%, 35%)`);
  line.setAttribute('stroke-width', '1.5');
  art.appendChild(line);
  card.appendChild(art);

  const caption = document.createElement('figcaption');
  caption.textContent = options.label ?? `item ${data.id}`;
  card.appendChild(caption);

  if (options.attributeChip) {
    const chip = document.createElement('span');
    chip.className = 'attribute-chip';
    chip.textContent = options.attributeChip;
    card.appendChild(chip);
  }
  return card;
}
