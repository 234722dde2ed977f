import init, { surrogate_curve, lif_trace, synthetic_scene } from "./pkg/spikegrid_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function bind(ids, draw) {
  const run = () => {
    for (const id of ids) {
      const out = $(`${id}-v`);
      if (out) out.textContent = $(id).value;
    }
    try {
      draw();
      $("error").textContent = "";
    } catch (e) {
      $("error").textContent = String(e);
    }
  };
  ids.forEach((id) => $(id).addEventListener("input", run));
  run();
}

function axes(ctx, w, h, pad) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#bbb";
  ctx.lineWidth = 1;
  ctx.setLineDash([]);
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
}

function polyline(ctx, xs, ys, color, dash = []) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.setLineDash(dash);
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(x, ys[i]) : ctx.moveTo(x, ys[i])));
  ctx.stroke();
  ctx.setLineDash([]);
}

function drawSurrogates() {
  const c = $("surrogate");
  const ctx = c.getContext("2d");
  const pad = 20, n = 301, lo = -1.5, hi = 1.5, lambda = num("lambda");
  const curves = [
    ["aad_arcsin", "#1f77b4", []],
    ["aad_arccos", "#ff7f0e", [6, 4]],
    ["rectangular", "#2ca02c", []],
  ].map(([k, color, dash]) => [surrogate_curve(k, lambda, lo, hi, n), color, dash]);
  const top = Math.max(1, ...curves.flatMap(([ys]) => Array.from(ys)));
  axes(ctx, c.width, c.height, pad);
  const xs = Array.from({ length: n }, (_, i) => pad + (i / (n - 1)) * (c.width - 2 * pad));
  const y = (v) => c.height - pad - (v / top) * (c.height - 2 * pad);
  for (const [ys, color, dash] of curves) polyline(ctx, xs, Array.from(ys, y), color, dash);
}

function drawLif() {
  const c = $("lif");
  const ctx = c.getContext("2d");
  const pad = 20, steps = 40, th = num("threshold");
  const t = lif_trace(num("decay"), th, num("current"), 30, steps);
  const v = t.potential(), s = t.spikes();
  const top = Math.max(th * 1.3, ...v);
  axes(ctx, c.width, c.height, pad);
  const x = (i) => pad + (i / (steps - 1)) * (c.width - 2 * pad);
  const y = (u) => c.height - pad - (u / top) * (c.height - 2 * pad);
  polyline(ctx, [x(0), x(steps - 1)], [y(th), y(th)], "#999", [4, 4]);
  polyline(ctx, Array.from(v, (_, i) => x(i)), Array.from(v, y), "#1f77b4");
  ctx.strokeStyle = "#d62728";
  s.forEach((spike, i) => {
    if (!spike) return;
    ctx.beginPath();
    ctx.moveTo(x(i), pad);
    ctx.lineTo(x(i), pad + 14);
    ctx.stroke();
  });
}

function paint(canvas, w, h, rgba) {
  const off = new OffscreenCanvas(w, h);
  off.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), w, h), 0, 0);
  const ctx = canvas.getContext("2d");
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function drawScene() {
  const scene = synthetic_scene(num("classes"), 32, 20, 1.0, num("noise"), num("seed"));
  const w = scene.width(), h = scene.height();
  const labels = scene.labels();
  const truth = new Uint8Array(w * h * 4);
  labels.forEach((l, i) => {
    const hue = ((l - 1) * 137.508) % 360;
    const [r, g, b] = hsl(hue, 0.65, 0.5);
    truth.set([r, g, b, 255], i * 4);
  });
  paint($("truth"), w, h, truth);
  paint($("pca"), w, h, scene.pca_rgba());

  const c = $("variance");
  const ctx = c.getContext("2d");
  const ev = scene.explained(), pad = 20;
  axes(ctx, c.width, c.height, pad);
  const bw = (c.width - 2 * pad) / ev.length;
  ctx.fillStyle = "#1f77b4";
  ev.forEach((r, i) => {
    const bh = r * (c.height - 2 * pad);
    ctx.fillRect(pad + i * bw + 1, c.height - pad - bh, bw - 2, bh);
  });
}

function hsl(h, s, l) {
  const k = (n) => (n + h / 30) % 12;
  const a = s * Math.min(l, 1 - l);
  const f = (n) => l - a * Math.max(-1, Math.min(k(n) - 3, 9 - k(n), 1));
  return [f(0), f(8), f(4)].map((v) => Math.round(v * 255));
}

await init();
bind(["lambda"], drawSurrogates);
bind(["decay", "current", "threshold"], drawLif);
bind(["classes", "noise", "seed"], drawScene);
