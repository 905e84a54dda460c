import init, { version, kernelProfile, entropyCurve, runCheck, checkIds } from "./pkg/ricci_entropy_web.js";

const PRESETS = {
  sphere: { name: "sphere", flow: { kind: "shrinking_sphere", dim: 2, t_sing: 1.0 }, schedule: { depth: 8 } },
  euclidean: { name: "euclidean", flow: { kind: "euclidean_static", dim: 2 }, schedule: { depth: 8 } },
  torus: { name: "torus", flow: { kind: "flat_torus", torus: { lattice: [[1.0]] } }, base_points: [[0.3]], schedule: { depth: 8 } },
  cigar: { name: "cigar", flow: { kind: "cigar_soliton" }, schedule: { depth: 6 } },
};

const $ = (id) => document.getElementById(id);
const out = $("out");

function show(text, isError = false) {
  out.textContent = text;
  out.className = isError ? "err" : "";
}

function guarded(fn) {
  return () => {
    try {
      fn();
    } catch (e) {
      show(String(e.message ?? e), true);
    }
  };
}

function plot(series, xlabel) {
  const canvas = $("plot");
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, width, height);
  const pts = series.flatMap((s) => s.x.map((x, i) => [x, s.y[i]])).filter(([x, y]) => isFinite(x) && isFinite(y));
  if (pts.length === 0) return;
  let [x0, x1] = [Math.min(...pts.map((p) => p[0])), Math.max(...pts.map((p) => p[0]))];
  let [y0, y1] = [Math.min(...pts.map((p) => p[1])), Math.max(...pts.map((p) => p[1]))];
  if (x1 === x0) x1 = x0 + 1;
  if (y1 === y0) y1 = y0 + 1;
  const sx = (x) => pad + ((x - x0) / (x1 - x0)) * (width - 2 * pad);
  const sy = (y) => height - pad - ((y - y0) / (y1 - y0)) * (height - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, width - 2 * pad, height - 2 * pad);
  ctx.fillStyle = "#333";
  ctx.fillText(`${y1.toPrecision(4)}`, 2, pad);
  ctx.fillText(`${y0.toPrecision(4)}`, 2, height - pad);
  ctx.fillText(`${x0.toPrecision(4)}`, pad, height - pad + 14);
  ctx.fillText(`${x1.toPrecision(4)}`, width - pad - 40, height - pad + 14);
  ctx.fillText(xlabel, width / 2 - 20, height - 8);
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.x.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(s.y[i])) : ctx.moveTo(sx(x), sy(s.y[i]))));
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, width - pad - 60, pad + 14 * (k + 1));
  });
}

function config() {
  return $("config").value;
}

function loadPreset() {
  $("config").value = JSON.stringify(PRESETS[$("preset").value], null, 2);
  refreshChecks();
}

function refreshChecks() {
  try {
    const ids = JSON.parse(checkIds(config()));
    $("check").innerHTML = ids.map((id) => `<option>${id}</option>`).join("");
  } catch (e) {
    $("check").innerHTML = "";
  }
}

function drawProfile() {
  const p = JSON.parse(kernelProfile(config(), Number($("tau").value)));
  plot([{ x: p.q, y: p.h, color: "#1f5fbf", label: "H" }], "first coordinate");
  show(`slice T = ${p.time}, method ${p.method}, ${p.q.length} nodes, mass ${p.mass.toFixed(12)}`);
}

function drawCurve() {
  const c = JSON.parse(entropyCurve(config()));
  const base = JSON.parse(config()).base_time ?? 0;
  const x = c.samples.map((s) => Math.log2(base - s.time));
  plot(
    [
      { x, y: c.samples.map((s) => s.w), color: "#bf1f1f", label: "W" },
      { x, y: c.samples.map((s) => s.n), color: "#1f8f3f", label: "N" },
    ],
    "log2 tau",
  );
  const fmt = (l) => (l ? `${l.estimate.toFixed(9)}${l.converged ? "" : " (not converged)"}` : "-");
  $("limits").textContent = `W -> ${fmt(c.w_limit)}, N -> ${fmt(c.n_limit)}`;
  show(c.samples.map((s) => `T=${s.time}  W=${s.w.toFixed(9)}  N=${s.n.toFixed(9)}`).join("\n"));
}

function runSelected() {
  const r = JSON.parse(runCheck($("check").value, config()));
  const rows = r.measurements.map((m) => `  ${m.label}: ${m.value.toExponential(3)} (${m.outcome})`);
  show([`${r.check_id}: ${r.outcome}`, `value ${r.residual}, tolerance ${r.tolerance}, budget ${r.budget}`, ...rows].join("\n"));
}

await init();
document.title += ` ${version()}`;
$("preset").addEventListener("change", loadPreset);
$("config").addEventListener("change", refreshChecks);
$("profile").addEventListener("click", guarded(drawProfile));
$("curve").addEventListener("click", guarded(drawCurve));
$("run").addEventListener("click", guarded(runSelected));
loadPreset();
