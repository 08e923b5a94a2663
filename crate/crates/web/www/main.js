import init, { analyzeSynth, analyzeWav, explorePower, scoreConfigs, classLabels } from "./pkg/usc_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const PITCH = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

function fail(where, e) {
  where.innerHTML = "";
  const p = document.createElement("p");
  p.className = "err";
  p.textContent = String(e.message ?? e);
  where.append(p);
}

function table(el, head, rows) {
  el.innerHTML = "<tr>" + head.map((h) => `<th>${h}</th>`).join("") + "</tr>" +
    rows.map((r) => "<tr>" + r.map((c) => `<td>${c}</td>`).join("") + "</tr>").join("");
}

function bars(el, values, names) {
  el.innerHTML = "";
  const max = Math.max(...values.map(Math.abs), 1e-9);
  values.forEach((v, i) => {
    const d = document.createElement("div");
    d.style.height = `${(Math.abs(v) / max) * 100}%`;
    d.title = `${names ? names[i] : i}: ${v.toFixed(3)}`;
    el.append(d);
  });
}

function drawMel(img) {
  const c = $("mel");
  c.width = img.length;
  c.height = 128;
  const ctx = c.getContext("2d");
  const data = ctx.createImageData(img.length, 128);
  img.forEach((frame, x) => frame.forEach((v, m) => {
    const o = ((127 - m) * img.length + x) * 4;
    data.data[o] = 255 * v;
    data.data[o + 1] = 255 * v * v;
    data.data[o + 2] = 80 + 120 * (1 - v);
    data.data[o + 3] = 255;
  }));
  ctx.putImageData(data, 0, 0);
}

function show(json) {
  const a = JSON.parse(json);
  $("finfo").textContent = `${a.seconds.toFixed(2)} s at ${a.sample_rate} Hz, ${a.frames} frames, ` +
    `${a.feature_vector.length} features; log mel power below.`;
  drawMel(a.mel_image);
  bars($("chroma"), a.chroma, PITCH);
  bars($("contrast"), a.contrast);
}

function features() {
  try {
    show(analyzeSynth($("cls").value, num("secs"), num("seed")));
  } catch (e) {
    fail($("finfo"), e);
  }
}

async function upload() {
  const f = $("wav").files[0];
  if (!f) return;
  try {
    show(analyzeWav(new Uint8Array(await f.arrayBuffer())));
  } catch (e) {
    fail($("finfo"), e);
  }
}

function power() {
  const q = {
    power: { p_idle_mw: num("p_idle"), p_cpu_mw: num("p_cpu"), p_tx_mw: num("p_tx") },
    clip_seconds: num("clip_s"),
    sample_rate: 16000,
    bandwidth_bytes_per_s: num("bw"),
    compute_s: [num("c_a"), num("c_b"), num("c_c")],
  };
  try {
    const rows = JSON.parse(explorePower(JSON.stringify(q)));
    table($("power"), ["Config", "Bytes sent", "Upload s", "Run s", "Avg mW", "Energy J"],
      rows.map((r) => [r.config, r.bytes, r.transmit_s.toFixed(4), r.total_s.toFixed(3),
        r.avg_power_mw.toFixed(1), r.energy_j.toFixed(2)]));
  } catch (e) {
    fail($("power"), e);
  }
}

const DEFAULT_METRICS = [
  ["A", 1852.00, 57.77, 0.6, 5.4],
  ["B", 1830.54, 16.42, 9.7, 300.7],
  ["C", 1786.86, 53.02, 1.7, 5.5],
];

function metricsTable() {
  const t = $("metrics");
  for (const [cfg, ...vals] of DEFAULT_METRICS) {
    const tr = t.insertRow();
    tr.insertCell().textContent = cfg;
    vals.forEach((v, i) => {
      const input = document.createElement("input");
      input.type = "number";
      input.value = v;
      input.id = `m_${cfg}_${i}`;
      input.addEventListener("input", score);
      tr.insertCell().append(input);
    });
  }
}

function score() {
  const metrics = DEFAULT_METRICS.map(([cfg]) => {
    const v = (i) => Number($(`m_${cfg}_${i}`).value);
    return { config: cfg, power_mw: v(0), runtime_s: v(1), latency_small_ms: v(2), latency_large_ms: v(3) };
  });
  const criterion = document.querySelector("input[name=crit]:checked").value;
  try {
    const card = JSON.parse(scoreConfigs(JSON.stringify({ metrics, criterion })));
    table($("score"), ["Config", "Power", "Runtime", "Latency", "Tally"],
      card.rows.map((r) => [r.config, r.power, r.runtime, r.latency, `<b>${r.tally}</b>`]));
  } catch (e) {
    fail($("score"), e);
  }
}

await init();
for (const label of JSON.parse(classLabels())) {
  $("cls").append(new Option(label.replace("_", " "), label));
}
$("cls").value = "siren";
$("gen").addEventListener("click", features);
$("wav").addEventListener("change", upload);
document.querySelectorAll("#power ~ *, section:nth-of-type(2) input").forEach((i) => i.addEventListener("input", power));
document.querySelectorAll("input[name=crit]").forEach((i) => i.addEventListener("change", score));
metricsTable();
features();
power();
score();
$("status").textContent = "Ready. Everything below runs locally in WebAssembly.";
