import init, { price_put, rank_profile, conditional_mean_curve } from "./pkg/kcme_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const seed = (id) => BigInt(Math.max(0, Math.floor(num(id))));

function run(out, f) {
  $(out).textContent = "running...";
  // Let the status paint before the synchronous call blocks the page.
  setTimeout(() => {
    try {
      f();
    } catch (e) {
      $(out).textContent = `error: ${e.message ?? e}`;
    }
  }, 20);
}

function plot(canvas, series, { logX = false, yLabel = "" } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, w, h);
  const tx = (x) => (logX ? Math.log10(x) : x);
  const xs = series.flatMap((s) => s.x.map(tx));
  const ys = series.flatMap((s) => s.y);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(0, ...ys), Math.max(...ys) * 1.05 || 1];
  const px = (x) => pad + ((tx(x) - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const py = (y) => h - pad - ((y - y0) / (y1 - y0 || 1)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "12px sans-serif";
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  ctx.fillText(y0.toPrecision(3), 2, h - pad);
  ctx.fillText(yLabel, pad, pad - 8);
  series.forEach((s) => {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    s.x.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.y[i])) : ctx.moveTo(px(x), py(s.y[i]))));
    ctx.stroke();
    s.x.forEach((x, i) => ctx.fillRect(px(x) - 2, py(s.y[i]) - 2, 4, 4));
  });
  series.forEach((s, i) => {
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, w - pad - 150, pad + 16 + 14 * i);
  });
}

function price() {
  const r = price_put(num("p-n"), num("p-t"), num("p-k"), num("p-r"), Number($("p-eps").value), seed("p-seed"));
  const rows = [
    ["cme_lr", r.cme_price, r.cme_millis, `rank_x ${r.rank_x}, rank_y ${r.rank_y}`],
    ["ls", r.ls_price, r.ls_millis, "degree 4"],
    ["european (MC)", r.european_price, null, `se ${r.european_std_error.toFixed(4)}`],
  ];
  $("p-out").innerHTML =
    "<table><tr><th>method</th><th>price</th><th>ms</th><th></th></tr>" +
    rows
      .map(([m, p, t, note]) => `<tr><td>${m}</td><td>${p.toFixed(4)}</td><td>${t === null ? "" : t.toFixed(1)}</td><td>${note}</td></tr>`)
      .join("") +
    "</table>";
  r.free();
}

function ranks() {
  const eps = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7];
  const v = rank_profile(num("r-n"), num("r-t"), seed("r-seed"), new Float64Array(eps));
  const rx = [], ry = [];
  for (let i = 0; i < v.length; i += 4) {
    rx.push(v[i + 1]);
    ry.push(v[i + 2]);
  }
  $("r-out").textContent = eps.map((e, i) => `eps ${e}: rank K_X ${rx[i]}, rank K_Y ${ry[i]}`).join("; ");
  plot($("r-plot"), [
    { x: eps, y: ry, color: "#c33", label: "rank K_Y" },
    { x: eps, y: rx, color: "#36c", label: "rank K_X" },
  ], { logX: true, yLabel: "rank vs log10 epsilon" });
}

function curve() {
  const m = 61;
  const v = conditional_mean_curve(num("c-n"), num("c-a"), num("c-s"), Number($("c-eps").value), m, seed("c-seed"));
  const x = Array.from(v.slice(0, m));
  const fitted = Array.from(v.slice(m, 2 * m));
  const exact = Array.from(v.slice(2 * m));
  const rms = Math.sqrt(fitted.reduce((acc, f, i) => acc + (f - exact[i]) ** 2, 0) / m);
  $("c-out").textContent = `RMS gap on the grid: ${rms.toExponential(2)}`;
  plot($("c-plot"), [
    { x, y: exact, color: "#333", label: "exact" },
    { x, y: fitted, color: "#c33", label: "low-rank CME" },
  ], { yLabel: "E[f(Y) | X = x]" });
}

await init();
$("p-go").onclick = () => run("p-out", price);
$("r-go").onclick = () => run("r-out", ranks);
$("c-go").onclick = () => run("c-out", curve);
