import init, { Demo, samplerStats } from "./pkg/anyres_web.js";

const $ = (id) => document.getElementById(id);
let demo = null;

function paint(canvas, rgba, size) {
  canvas.width = size;
  canvas.height = size;
  const img = new ImageData(new Uint8ClampedArray(rgba), size, size);
  canvas.getContext("2d").putImageData(img, 0, 0);
}

function showError(e) {
  $("error").textContent = e ? String(e.message ?? e) : "";
}

// Keep v inside the admissible range [p/2s, 1 - p/2s].
function clampedCenter(p, s) {
  const half = p / (2 * s);
  const pick = (id) => half + ($(id).value / 1000) * (1 - 2 * half);
  return [pick("vx"), pick("vy")];
}

function update() {
  if (!demo) return;
  const p = demo.patch;
  const seed = BigInt($("seed").value);
  const s = Number($("scale").value);
  const [vx, vy] = clampedCenter(p, s);
  $("seed-out").textContent = $("seed").value;
  $("scale-out").textContent = s;
  $("vx-out").textContent = vx.toFixed(3);
  $("vy-out").textContent = vy.toFixed(3);
  try {
    paint($("global"), demo.render(seed, p), p);
    const ctx = $("global").getContext("2d");
    const w = (p * p) / s;
    ctx.strokeStyle = "#f00";
    ctx.strokeRect(vx * p - w / 2, vy * p - w / 2, w, w);
    paint($("patch"), demo.sample(seed, s, vx, vy), p);
    paint($("warp"), demo.warp(seed, s, vx, vy), p);
    showError(null);
  } catch (e) {
    showError(e);
  }
}

function use(d, label) {
  demo = d;
  const s = $("scale");
  s.min = d.patch;
  s.max = Math.max(d.scaleMax * 2, d.patch + 1);
  s.value = Math.min(Math.max(Number(s.value), d.patch), Number(s.max));
  $("model").textContent = `${label}: p = ${d.patch}, trained up to s = ${d.scaleMax}`;
  update();
}

function bars(canvas, counts, color) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const max = Math.max(...counts, 1);
  const w = canvas.width / counts.length;
  ctx.fillStyle = color;
  counts.forEach((c, i) => {
    const h = (c / max) * (canvas.height - 4);
    ctx.fillRect(i * w + 1, canvas.height - h, w - 2, h);
  });
}

function drawSampler() {
  try {
    const sizes = Uint32Array.from($("sizes").value.split(",").map((t) => Number(t.trim())));
    const p = demo ? demo.patch : 64;
    const bins = 20;
    const out = samplerStats(sizes, p, Number($("draws").value), bins, 0n);
    bars($("hist-s"), Array.from(out.slice(1, 1 + bins)), "#36c");
    bars($("hist-v"), Array.from(out.slice(1 + bins)), "#c63");
    $("hist-s-cap").textContent = `distribution of s (global draws: ${(100 * out[0]).toFixed(1)}%)`;
    showError(null);
  } catch (e) {
    showError(e);
  }
}

await init();
for (const id of ["seed", "scale", "vx", "vy"]) $(id).addEventListener("input", update);
$("fresh").addEventListener("click", () => use(new Demo(0n), "untrained"));
$("ckpt").addEventListener("change", async (ev) => {
  const file = ev.target.files[0];
  if (!file) return;
  try {
    use(Demo.fromCheckpoint(new Uint8Array(await file.arrayBuffer())), file.name);
  } catch (e) {
    showError(e);
  }
});
$("draw").addEventListener("click", drawSampler);
use(new Demo(0n), "untrained");
drawSampler();
