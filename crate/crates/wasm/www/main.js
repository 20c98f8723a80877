import init, { Wavefield, Inversion } from "./pkg/quantwave_wasm.js";

const $ = (id) => document.getElementById(id);

// Draws an x-major raster (x across, z down) with a value -> [r, g, b] map.
function paint(canvas, data, nx, nz, color) {
  const off = new OffscreenCanvas(nx, nz);
  const ctx = off.getContext("2d");
  const img = ctx.createImageData(nx, nz);
  for (let x = 0; x < nx; x++) {
    for (let z = 0; z < nz; z++) {
      const [r, g, b] = color(data[x * nz + z]);
      const k = 4 * (z * nx + x);
      img.data[k] = r; img.data[k + 1] = g; img.data[k + 2] = b; img.data[k + 3] = 255;
    }
  }
  ctx.putImageData(img, 0, 0);
  const c = canvas.getContext("2d");
  c.imageSmoothingEnabled = false;
  c.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function diverging(scale) {
  return (v) => {
    const s = Math.max(-1, Math.min(1, v / scale));
    return s >= 0 ? [255, 255 * (1 - s), 255 * (1 - s)] : [255 * (1 + s), 255 * (1 + s), 255];
  };
}

function gray(lo, hi) {
  return (v) => {
    const g = 255 * Math.max(0, Math.min(1, (v - lo) / (hi - lo)));
    return [g, g, g];
  };
}

// ---- wavefield ----
let wave = null;
let centre = { acoustic: [40, 40], em: [25, 25] };

function drawFrame() {
  if (!wave) return;
  const t = +$("time").value;
  paint($("field"), wave.frame(t), wave.n_x, wave.n_z, diverging(0.05 * wave.peak));
  const ctx = $("field").getContext("2d");
  const sx = $("field").width / wave.n_x;
  const el = wave.elements();
  ctx.fillStyle = "#0a0";
  for (let i = 0; i < el.length; i += 2) ctx.fillRect(el[i] * sx, el[i + 1] * sx, sx, sx);
  $("time-label").textContent = `t = ${t} / ${wave.n_t - 1}`;
}

function drawTraces() {
  const cd = wave.channel_data();
  let peak = 0;
  for (const v of cd) peak = Math.max(peak, Math.abs(v));
  // [t][c] -> x-major [c][t] for paint
  const nc = wave.n_c, nt = wave.n_t;
  const cols = new Float32Array(nc * nt);
  for (let t = 0; t < nt; t++) for (let c = 0; c < nc; c++) cols[c * nt + t] = cd[t * nc + c];
  paint($("traces"), cols, nc, nt, diverging(0.05 * peak));
}

function simulate() {
  const m = $("modality").value;
  const [cx, cz] = centre[m];
  try {
    if (wave) wave.free();
    wave = new Wavefield(m, cx, cz, +$("radius").value, +$("tx").value);
  } catch (e) {
    $("cfl").textContent = String(e);
    wave = null;
    return;
  }
  $("cfl").textContent = "CFL: " + wave.cfl;
  $("time").max = wave.n_t - 1;
  $("time").value = Math.floor(wave.n_t / 2);
  drawFrame();
  drawTraces();
}

let playing = null;
$("field").addEventListener("click", (ev) => {
  const m = $("modality").value;
  const n = m === "em" ? 50 : 80;
  const r = $("field").getBoundingClientRect();
  centre[m] = [Math.floor(((ev.clientX - r.left) / r.width) * n), Math.floor(((ev.clientY - r.top) / r.height) * n)];
  simulate();
});
$("time").addEventListener("input", drawFrame);
$("simulate").addEventListener("click", () => {
  simulate();
  if (playing) cancelAnimationFrame(playing);
  const tick = () => {
    if (!wave) return;
    const t = +$("time").value;
    if (t >= wave.n_t - 1) return;
    $("time").value = t + 2;
    drawFrame();
    playing = requestAnimationFrame(tick);
  };
  $("time").value = 0;
  playing = requestAnimationFrame(tick);
});

// ---- inversion ----
let inv = null;
let losses = [];
let fwiCentre = [20, 18];
let running = false;

function drawInversion() {
  const lo = inv.min_value, hi = inv.max_value;
  paint($("truth"), inv.truth(), inv.n_x, inv.n_z, gray(lo, hi));
  paint($("estimate"), inv.sound_speed(), inv.n_x, inv.n_z, gray(lo, hi));
  const c = $("loss").getContext("2d");
  c.clearRect(0, 0, 320, 240);
  c.strokeStyle = "#36c";
  c.beginPath();
  const logs = losses.map((l) => Math.log10(l));
  const top = Math.max(...logs), bottom = Math.min(...logs) - 1e-9;
  const n = Math.max(+$("iters").value, 1);
  logs.forEach((v, i) => {
    const x = (i / n) * 310 + 5;
    const y = 5 + ((top - v) / (top - bottom || 1)) * 230;
    i === 0 ? c.moveTo(x, y) : c.lineTo(x, y);
  });
  c.stroke();
  $("fwi-status").textContent =
    `iteration ${inv.iteration}  loss ${inv.loss.toExponential(4)}  SoS NRMSE ${inv.nrmse.toFixed(4)}` +
    (inv.finished ? "  (done)" : "");
}

function reset() {
  running = false;
  if (inv) inv.free();
  try {
    inv = new Inversion(fwiCentre[0], fwiCentre[1], 5, +$("contrast").value / 100, +$("iters").value);
  } catch (e) {
    $("fwi-status").textContent = String(e);
    inv = null;
    return;
  }
  losses = [inv.loss];
  drawInversion();
}

function step() {
  if (!inv || inv.finished) return false;
  try {
    losses.push(inv.step());
  } catch (e) {
    $("fwi-status").textContent = String(e);
    return false;
  }
  drawInversion();
  return !inv.finished;
}

$("truth").addEventListener("click", (ev) => {
  const r = $("truth").getBoundingClientRect();
  fwiCentre = [Math.floor(((ev.clientX - r.left) / r.width) * 40), Math.floor(((ev.clientY - r.top) / r.height) * 40)];
  reset();
});
$("fwi-reset").addEventListener("click", reset);
$("fwi-step").addEventListener("click", step);
$("fwi-run").addEventListener("click", () => {
  running = !running;
  const loop = () => {
    if (running && step()) setTimeout(loop, 0);
    else running = false;
  };
  loop();
});

await init();
simulate();
reset();
