import init, { mapCurve, limitStaircase, simulateVsRecursion } from "./pkg/ltm_wasm.js";

const $ = (id) => document.getElementById(id);

function frame(canvas, xmax) {
  const ctx = canvas.getContext("2d");
  const pad = 30;
  const w = canvas.width - 2 * pad;
  const h = canvas.height - 2 * pad;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w, h);
  ctx.fillStyle = "#333";
  ctx.fillText("0", pad - 10, canvas.height - pad + 12);
  ctx.fillText(String(xmax), pad + w - 8, canvas.height - pad + 12);
  ctx.fillText("1", pad - 12, pad + 4);
  const px = (x) => pad + (x / xmax) * w;
  const py = (y) => pad + (1 - y) * h;
  return { ctx, px, py };
}

function line(f, xs, ys, color, dashed) {
  f.ctx.beginPath();
  f.ctx.setLineDash(dashed ? [5, 4] : []);
  f.ctx.strokeStyle = color;
  xs.forEach((x, i) => (i ? f.ctx.lineTo(f.px(x), f.py(ys[i])) : f.ctx.moveTo(f.px(x), f.py(ys[i]))));
  f.ctx.stroke();
  f.ctx.setLineDash([]);
}

function guarded(fn) {
  return () => {
    $("error").textContent = "";
    try {
      fn();
    } catch (e) {
      $("error").textContent = String(e.message ?? e);
    }
  };
}

function drawMap() {
  const c = JSON.parse(mapCurve($("mix").value, 401));
  const f = frame($("map"), 1);
  line(f, [0, 1], [0, 1], "#aaa", true);
  line(f, c.x, c.phi, "#1f5fbf", false);
  for (const r of c.roots) {
    f.ctx.beginPath();
    f.ctx.arc(f.px(r.x), f.py(r.x), 4, 0, 2 * Math.PI);
    f.ctx.fillStyle = r.stable ? "#1f5fbf" : "#fff";
    f.ctx.strokeStyle = "#1f5fbf";
    f.ctx.fill();
    f.ctx.stroke();
  }
}

function drawStairs() {
  const s = JSON.parse(limitStaircase($("mix").value, 801));
  const f = frame($("stairs"), 1);
  line(f, s.xi, s.y_star, "#c0392b", false);
  f.ctx.fillStyle = "#333";
  f.ctx.fillText("jumps: " + s.jumps.map((j) => j.toFixed(3)).join(", "), 40, 20);
}

function drawSim() {
  const horizon = Number($("horizon").value);
  const r = JSON.parse(
    simulateVsRecursion($("mix").value, Number($("n").value), Number($("upsilon").value), horizon, Number($("seed").value)),
  );
  const f = frame($("sim"), horizon);
  const t = r.z.map((_, i) => i);
  line(f, t, r.z, "#222", false);
  line(f, t, r.y, "#c0392b", true);
  f.ctx.fillStyle = "#333";
  f.ctx.fillText("solid: simulated z(t)   dashed: recursion y(t)", 40, 20);
}

await init();
$("draw-map").onclick = guarded(drawMap);
$("draw-stairs").onclick = guarded(drawStairs);
$("draw-sim").onclick = guarded(drawSim);
guarded(drawMap)();
guarded(drawStairs)();
