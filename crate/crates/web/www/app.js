import init, { compareEstimators, effrankSweep, scalingCurve } from "./pkg/lvggm_web.js";

const num = (id) => Number(document.getElementById(id).value);
const status = (id, text) => { document.getElementById(id).textContent = text; };

// Diverging map: blue for negative, red for positive, symmetric around 0.
function heatmap(canvasId, map, scale) {
  const canvas = document.getElementById(canvasId);
  const ctx = canvas.getContext("2d");
  const cell = canvas.width / map.cols;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  for (let i = 0; i < map.rows; i++) {
    for (let j = 0; j < map.cols; j++) {
      const v = Math.max(-1, Math.min(1, map.values[i * map.cols + j] / scale));
      const a = Math.round(255 * (1 - Math.abs(v)));
      ctx.fillStyle = v >= 0 ? `rgb(255,${a},${a})` : `rgb(${a},${a},255)`;
      ctx.fillRect(j * cell, i * cell, Math.ceil(cell), Math.ceil(cell));
    }
  }
}

// Scatter on log-log axes with optional line series.
function scatter(canvasId, series, { logX = true, logY = true, xLabel = "", yLabel = "", lines = [] } = {}) {
  const canvas = document.getElementById(canvasId);
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, M = 44;
  ctx.clearRect(0, 0, W, H);
  const tx = (v) => (logX ? Math.log10(v) : v);
  const ty = (v) => (logY ? Math.log10(v) : v);
  const pts = series.flatMap((s) => s.points).concat(lines.flatMap((l) => l.points));
  if (pts.length === 0) return;
  let [x0, x1] = [Math.min(...pts.map((p) => tx(p[0]))), Math.max(...pts.map((p) => tx(p[0])))];
  let [y0, y1] = [Math.min(...pts.map((p) => ty(p[1]))), Math.max(...pts.map((p) => ty(p[1])))];
  if (x1 - x0 < 1e-9) { x0 -= 0.5; x1 += 0.5; }
  if (y1 - y0 < 1e-9) { y0 -= 0.5; y1 += 0.5; }
  const px = (v) => M + ((tx(v) - x0) / (x1 - x0)) * (W - 2 * M);
  const py = (v) => H - M - ((ty(v) - y0) / (y1 - y0)) * (H - 2 * M);

  ctx.strokeStyle = "#000";
  ctx.beginPath();
  ctx.moveTo(M, M); ctx.lineTo(M, H - M); ctx.lineTo(W - M, H - M);
  ctx.stroke();
  ctx.fillStyle = "#000";
  ctx.font = "11px sans-serif";
  const fmt = (v) => (Math.abs(v) >= 100 || Math.abs(v) < 0.01 ? v.toExponential(1) : v.toPrecision(3));
  for (let k = 0; k <= 4; k++) {
    const xv = x0 + ((x1 - x0) * k) / 4, yv = y0 + ((y1 - y0) * k) / 4;
    const xr = logX ? 10 ** xv : xv, yr = logY ? 10 ** yv : yv;
    ctx.fillText(fmt(xr), px(xr) - 12, H - M + 14);
    ctx.fillText(fmt(yr), 2, py(yr) + 4);
  }
  ctx.fillText(xLabel, W / 2 - 30, H - 8);
  ctx.fillText(yLabel, M + 4, M - 8);

  for (const s of series) {
    ctx.fillStyle = s.color;
    for (const [x, y] of s.points) {
      ctx.beginPath();
      ctx.arc(px(x), py(y), s.radius ?? 3, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
  for (const l of lines) {
    ctx.strokeStyle = l.color;
    ctx.setLineDash(l.dash ?? []);
    ctx.beginPath();
    l.points.forEach(([x, y], k) => (k ? ctx.lineTo(px(x), py(y)) : ctx.moveTo(px(x), py(y))));
    ctx.stroke();
    ctx.setLineDash([]);
  }
}

function timed(statusId, fn) {
  status(statusId, "running…");
  // Let the status text paint before the blocking call.
  setTimeout(() => {
    const t0 = performance.now();
    try {
      const text = fn();
      status(statusId, `${text}\n(${((performance.now() - t0) / 1000).toFixed(2)} s)`);
    } catch (e) {
      status(statusId, `error: ${e}`);
    }
  }, 20);
}

function runCompare() {
  timed("c-status", () => {
    const res = JSON.parse(compareEstimators(
      num("c-p"), num("c-r"), num("c-n"), num("c-scale"), num("c-ca"), num("c-cb"), num("c-seed")));
    const scale = Math.max(...res.theta_star.values.map(Math.abs));
    heatmap("m-star", res.theta_star, scale);
    heatmap("m-lvggm", res.theta_lvggm, scale);
    heatmap("m-glasso", res.theta_glasso, scale);
    heatmap("m-l", res.l_hat, Math.max(1e-12, ...res.l_hat.values.map(Math.abs)));
    return [
      `energy ratio ${res.energy_ratio.toFixed(3)}, λ = ${res.lambda.toPrecision(3)}, μ = ${res.mu.toPrecision(3)}`,
      `‖Θ̂ − Θ*‖_F: LVGGM ${res.lvggm_error.toFixed(4)} (${res.lvggm_iterations} it), ` +
        `glasso ${res.glasso_error.toFixed(4)} (${res.glasso_iterations} it)`,
      `rank(L̂) = ${res.rank_l_hat}`,
    ].join("\n");
  });
}

function runEffrank() {
  timed("e-status", () => {
    const res = JSON.parse(effrankSweep(num("e-p"), num("e-r"), num("e-reps"), num("e-seed")));
    scatter("e-plot", [
      { color: "rgba(31,119,180,0.45)", points: res.scatter },
      { color: "#d62728", radius: 4, points: res.points.map((p) => [p.ratio, p.mean]) },
    ], { logY: false, xLabel: "energy ratio", yLabel: "effective rank" });
    return `Spearman(ratio, mean r_eff) = ${res.spearman?.toFixed(3) ?? "n/a"}; ` +
      `max r_eff ${res.max_r_eff.toFixed(2)} (p = ${res.p}); unattained cells ${res.unattained}`;
  });
}

function runScaling() {
  timed("s-status", () => {
    const res = JSON.parse(scalingCurve(num("s-p"), num("s-r"), num("s-reps"), num("s-ca"), num("s-cb"), num("s-seed")));
    const pts = res.points.map((p) => [p[3], p[4]]);
    const lines = [];
    if (res.slope !== null) {
      const xs = pts.map((p) => p[0]);
      const [a, b] = [Math.min(...xs), Math.max(...xs)];
      const fit = (x) => Math.exp(res.intercept + res.slope * Math.log(x));
      lines.push({ color: "#d62728", points: [[a, fit(a)], [b, fit(b)]] });
      const c = fit(a) * Math.sqrt(a);
      lines.push({ color: "#555", dash: [5, 3], points: [[a, c / Math.sqrt(a)], [b, c / Math.sqrt(b)]] });
    }
    scatter("s-plot", [{ color: "rgba(31,119,180,0.7)", points: pts }], {
      lines, xLabel: "rescaled n", yLabel: "‖Θ̂ − Θ*‖_F",
    });
    return `fitted slope ${res.slope?.toFixed(3) ?? "n/a"} (dashed: slope −1/2); non-converged ${res.not_converged}`;
  });
}

await init();
document.getElementById("c-run").addEventListener("click", runCompare);
document.getElementById("e-run").addEventListener("click", runEffrank);
document.getElementById("s-run").addEventListener("click", runScaling);
runCompare();
