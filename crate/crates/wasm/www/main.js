// Plain-JS driver for the wasm demo: no framework, three interactions
// (train, occupation heatmap, structure-factor probe).

const status = document.getElementById("status");
const decayCanvas = document.getElementById("decay");
const mapCanvas = document.getElementById("map");
const sfCanvas = document.getElementById("sf");
const probeOut = document.getElementById("probe");

let demo = null;
let RydbergDemo = null;
let domain = [0, 0.5, 5, 4];
let lastProbe = null;

function setStatus(text) { status.textContent = text; }

async function boot() {
  try {
    const mod = await import("./pkg/spinrb_wasm.js");
    await mod.default();
    RydbergDemo = mod.RydbergDemo;
    setStatus("wasm ready - press train");
  } catch (e) {
    setStatus("wasm bundle not found: build it first (see the note at the bottom).\n" + e);
  }
}

function axes(ctx, w, h, pad) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad / 2, w - 1.5 * pad, h - 1.5 * pad);
}

function drawDecay(history) {
  const ctx = decayCanvas.getContext("2d");
  const [w, h, pad] = [decayCanvas.width, decayCanvas.height, 44];
  axes(ctx, w, h, pad);
  const pts = history.filter(r => r.max_residual > 0);
  if (!pts.length) return;
  const nMax = Math.max(...pts.map(r => r.basis_size));
  const lo = Math.min(...pts.map(r => Math.log10(r.max_residual)));
  const hi = Math.max(...pts.map(r => Math.log10(r.max_residual)));
  const x = n => pad + (w - 1.5 * pad) * (n / nMax);
  const y = v => pad / 2 + (h - 1.5 * pad) * (hi - Math.log10(v)) / Math.max(hi - lo, 1e-9);
  ctx.strokeStyle = "#d33";
  ctx.lineWidth = 1.6;
  ctx.beginPath();
  pts.forEach((r, i) => i ? ctx.lineTo(x(r.basis_size), y(r.max_residual)) : ctx.moveTo(x(r.basis_size), y(r.max_residual)));
  ctx.stroke();
  ctx.fillStyle = "#d33";
  pts.forEach(r => ctx.fillRect(x(r.basis_size) - 1.5, y(r.max_residual) - 1.5, 3, 3));
  ctx.fillStyle = "#666";
  ctx.font = "11px system-ui";
  ctx.fillText(`N = ${nMax}`, w - pad - 38, h - 6);
  ctx.fillText(`1e${hi.toFixed(0)}`, 4, pad / 2 + 8);
  ctx.fillText(`1e${lo.toFixed(0)}`, 4, h - pad + 4);
}

// Simple blue->yellow->red color scale on [0, 1].
function color(v) {
  const t = Math.max(0, Math.min(1, v));
  const r = Math.round(255 * Math.min(1, 2 * t));
  const g = Math.round(255 * (t < 0.5 ? 2 * t : 2 - 2 * t));
  const b = Math.round(255 * Math.max(0, 1 - 2 * t));
  return [r, g, b];
}

function drawMap() {
  const [w, h] = [110, 80];
  const values = demo.occupation_map(w, h);
  const ctx = mapCanvas.getContext("2d");
  const img = ctx.createImageData(w, h);
  for (let j = 0; j < h; j++) {
    for (let i = 0; i < w; i++) {
      const v = values[j * w + i];
      const [r, g, b] = color(v);
      // Flip vertically: mu_2 grows upward.
      const o = 4 * ((h - 1 - j) * w + i);
      img.data[o] = r; img.data[o + 1] = g; img.data[o + 2] = b; img.data[o + 3] = 255;
    }
  }
  const off = new OffscreenCanvas(w, h);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, mapCanvas.width, mapCanvas.height);
  ctx.drawImage(off, 0, 0, mapCanvas.width, mapCanvas.height);
  if (lastProbe) markProbe(lastProbe[0], lastProbe[1]);
}

function markProbe(mu1, mu2) {
  const ctx = mapCanvas.getContext("2d");
  const px = (mu1 - domain[0]) / (domain[2] - domain[0]) * mapCanvas.width;
  const py = (1 - (mu2 - domain[1]) / (domain[3] - domain[1])) * mapCanvas.height;
  ctx.strokeStyle = "#fff";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(px, py, 6, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.strokeStyle = "#000";
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.arc(px, py, 7, 0, 2 * Math.PI);
  ctx.stroke();
}

function drawStructureFactor(data) {
  const ctx = sfCanvas.getContext("2d");
  const [w, h, pad] = [sfCanvas.width, sfCanvas.height, 44];
  axes(ctx, w, h, pad);
  const n = data.k.length;
  const top = Math.max(...data.sf_truth, ...data.sf_rb, 1e-9) * 1.15;
  const x = i => pad + (w - 1.5 * pad) * (i + 0.5) / n;
  const y = v => pad / 2 + (h - 1.5 * pad) * (1 - v / top);
  const base = y(0);
  ctx.fillStyle = "#36a2";
  ctx.strokeStyle = "#36a";
  const bw = (w - 1.5 * pad) / n * 0.55;
  data.sf_rb.forEach((v, i) => {
    ctx.fillRect(x(i) - bw / 2, y(v), bw, base - y(v));
    ctx.strokeRect(x(i) - bw / 2, y(v), bw, base - y(v));
  });
  ctx.fillStyle = "#d33";
  data.sf_truth.forEach((v, i) => {
    ctx.beginPath();
    ctx.arc(x(i), y(v), 3.5, 0, 2 * Math.PI);
    ctx.fill();
  });
  ctx.fillStyle = "#666";
  ctx.font = "11px system-ui";
  data.k.forEach((k, i) => ctx.fillText((k / Math.PI).toFixed(2) + "π", x(i) - 12, h - 4));
}

async function train() {
  if (!RydbergDemo) return;
  const nx = +document.getElementById("nx").value;
  const grid = +document.getElementById("grid").value;
  const tol = +document.getElementById("tol").value;
  const budget = +document.getElementById("budget").value;
  setStatus(`training: Nx = ${nx}, ${grid}x${grid} grid ...`);
  await new Promise(r => setTimeout(r, 20)); // let the status paint
  try {
    const t0 = performance.now();
    demo = new RydbergDemo(nx);
    domain = Array.from(demo.domain());
    const result = JSON.parse(demo.train(grid, tol, budget));
    const dt = ((performance.now() - t0) / 1000).toFixed(2);
    const last = result.history[result.history.length - 1];
    setStatus(
      `done in ${dt}s: N = ${result.basis_size} basis vectors from ${result.history.length} exact solves` +
      `  (final max residual ${last.max_residual.toExponential(2)}, converged: ${result.converged})`);
    drawDecay(result.history);
    lastProbe = null;
    drawMap();
    probe((domain[0] + domain[2]) * 0.7, (domain[1] + domain[3]) * 0.75);
  } catch (e) {
    setStatus("error: " + e);
  }
}

function probe(mu1, mu2) {
  if (!demo) return;
  try {
    const data = JSON.parse(demo.structure_factor(mu1, mu2));
    lastProbe = [mu1, mu2];
    drawMap();
    drawStructureFactor(data);
    probeOut.textContent =
      `mu = (${mu1.toFixed(3)}, ${mu2.toFixed(3)})\n` +
      `lambda_rb = ${data.lambda_rb.toFixed(10)}   lambda_exact = ${data.lambda_truth.toFixed(10)}\n` +
      `degeneracy m = ${data.degeneracy}   residual = ${data.residual.toExponential(2)}`;
  } catch (e) {
    probeOut.textContent = "probe error: " + e;
  }
}

mapCanvas.addEventListener("click", ev => {
  const rect = mapCanvas.getBoundingClientRect();
  const fx = (ev.clientX - rect.left) / rect.width;
  const fy = 1 - (ev.clientY - rect.top) / rect.height;
  probe(domain[0] + fx * (domain[2] - domain[0]), domain[1] + fy * (domain[3] - domain[1]));
});

document.getElementById("train").addEventListener("click", train);
boot();
