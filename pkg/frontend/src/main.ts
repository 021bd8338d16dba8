import { ApiClient } from './api';
import { SessionApp } from './app';

const params = new URLSearchParams(window.location.search);
const base = params.get('api') ?? window.location.origin;
const mode = params.get('mode') ?? 'human';
const seedRaw = params.get('seed');

const root = document.getElementById('app');
if (!root) throw new Error('missing #app mount point');

const app = new SessionApp(root, new ApiClient(base), mode);
void app.start(seedRaw === null ? undefined : Number(seedRaw)).catch((err) => {
  root.textContent = `failed to start a session: ${err}`;
});
