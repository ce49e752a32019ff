import init, { theory_curve, ensemble_curve, w_histogram } from "./pkg/superatom_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function axes(ctx, w, h, pad, xmax, ymax) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(ymax.toFixed(2), 2, pad + 4);
  ctx.fillText("0", pad - 12, h - pad + 4);
  ctx.fillText(xmax.toFixed(1), w - pad - 20, h - pad + 14);
  return (x, y) => [pad + (x / xmax) * (w - 2 * pad), h - pad - (y / ymax) * (h - 2 * pad)];
}

function line(ctx, map, xs, ys, color) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  xs.forEach((x, i) => {
    const [px, py] = map(x, ys[i]);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.stroke();
}

function level(ctx, map, xmax, y) {
  ctx.setLineDash([4, 4]);
  line(ctx, map, [0, xmax], [y, y], "#bbb");
  ctx.setLineDash([]);
}

function report(id, fn) {
  try {
    fn();
  } catch (e) {
    $(id).textContent = `error: ${e.message ?? e}`;
  }
}

function drawTheory() {
  const canvas = $("th-canvas");
  const ctx = canvas.getContext("2d");
  const tmax = num("th-tmax");
  const c = theory_curve(num("th-n"), tmax, 1200);
  const map = axes(ctx, canvas.width, canvas.height, 30, tmax, 1);
  level(ctx, map, tmax, 1 / 6);
  line(ctx, map, c.x, c.first, "#aaa");
  line(ctx, map, c.x, c.second, "#1f5fbf");
}

function drawEnsemble() {
  const canvas = $("en-canvas");
  const ctx = canvas.getContext("2d");
  const tmax = num("en-tmax");
  const started = performance.now();
  const c = ensemble_curve(num("en-n"), $("en-profile").value, num("en-k"), num("en-r"), tmax, 400, $("en-which").value, 1n);
  const map = axes(ctx, canvas.width, canvas.height, 30, tmax, 1);
  level(ctx, map, tmax, 1 / 6);
  line(ctx, map, c.x, c.second, "#1f5fbf");
  line(ctx, map, c.x, c.first, "#c0392b");
  $("en-note").textContent = `red: Monte Carlo mean; blue: analytic curve for the same N. ${((performance.now() - started) / 1000).toFixed(1)} s`;
}

function drawOverlaps() {
  const canvas = $("w-canvas");
  const ctx = canvas.getContext("2d");
  const n = num("w-n");
  const h = w_histogram(n, 100, num("w-r"), num("w-a"), 40, 7n);
  const centers = h.centers;
  const density = h.density;
  const ymax = Math.max(1.05, ...density);
  const map = axes(ctx, canvas.width, canvas.height, 30, 6, ymax);
  const width = centers.length > 1 ? centers[1] - centers[0] : 1;
  ctx.fillStyle = "#e8b4a8";
  centers.forEach((x, i) => {
    const [x0, y0] = map(x - width / 2, density[i]);
    const [x1, y1] = map(x + width / 2, 0);
    ctx.fillRect(x0, y0, x1 - x0 - 1, y1 - y0);
  });
  line(ctx, map, centers, h.exponential, "#1f5fbf");
  const verdict = h.ks_accepted ? "consistent with" : "rejects";
  $("w-note").textContent = `mean N|w|² = ${(h.mean * n).toFixed(3)}; KS distance ${h.ks_statistic.toFixed(4)} vs ${h.ks_critical.toFixed(4)} ${verdict} Exp(1/N) at the 1% level`;
}

await init();
$("th-run").onclick = () => report("th-run", drawTheory);
$("en-run").onclick = () => report("en-note", drawEnsemble);
$("w-run").onclick = () => report("w-note", drawOverlaps);
drawTheory();
