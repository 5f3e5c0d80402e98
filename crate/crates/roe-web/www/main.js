import init, { DemoEnv, DemoTrainer, list_scenarios } from "./pkg/roe_web.js";

const COLORS = {
  wall: "#3a404b",
  acid: "#3c871f",
  medkit: "#d0d0d0",
  armor: "#42c9a9",
  weapon: "#caa84f",
  ammo: "#8f7a3d",
  enemy: "#c25b5b",
  agent: "#5b9bd5",
};

let env = null;
let trainer = null;
let training = false;
let chart = { intrinsic: [], entropy: [] };

const $ = (id) => document.getElementById(id);

function drawGrid(view) {
  const canvas = $("grid");
  const ctx = canvas.getContext("2d");
  const cell = Math.floor(Math.min(canvas.width / view.width, canvas.height / view.height));
  ctx.fillStyle = "#0d0e11";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  for (const c of view.cells) {
    ctx.fillStyle = COLORS[c.kind] ?? "#888";
    ctx.fillRect(c.x * cell, c.y * cell, cell - 1, cell - 1);
  }
  // Agent with a facing notch.
  const [ax, ay] = view.agent;
  ctx.fillStyle = COLORS.agent;
  ctx.fillRect(ax * cell, ay * cell, cell - 1, cell - 1);
  ctx.fillStyle = "#e6e9ee";
  const n = Math.max(2, Math.floor(cell / 4));
  const cx = ax * cell + cell / 2, cy = ay * cell + cell / 2;
  const offsets = { north: [0, -1], east: [1, 0], south: [0, 1], west: [-1, 0] };
  const [dx, dy] = offsets[view.facing];
  ctx.fillRect(cx + dx * cell * 0.3 - n / 2, cy + dy * cell * 0.3 - n / 2, n, n);
}

function renderBars(el, names, values, fmt, scale) {
  const max = Math.max(...values, 1e-9);
  let html = "";
  for (let i = 0; i < names.length; i++) {
    const w = Math.round(100 * values[i] / (scale ?? max));
    html += `<div class="bar-row"><span class="name">${names[i]}</span>` +
      `<span class="bar-outer"><span class="bar-inner" style="width:${Math.min(100, w)}%"></span></span>` +
      `<span class="val">${fmt(values[i])}</span></div>`;
  }
  el.innerHTML = html;
}

function updatePlayPanels(step) {
  drawGrid(step.view);
  $("hud-health").textContent = step.view.health.toFixed(0);
  $("hud-ammo").textContent = step.view.ammo;
  $("hud-tick").textContent = step.view.tick;
  $("hud-episode").textContent = step.episode;
  $("hud-reward").textContent =
    `${step.intrinsic.toFixed(2)} intrinsic / ${step.extrinsic.toFixed(1)} extrinsic`;
  const r = step.rarity;
  renderBars($("rarity-bars"), r.names, r.rewards_per_occurrence,
    (v) => v.toFixed(1), 100);
  $("play-msg").textContent = step.events.length
    ? "events: " + step.events.map(([n, c]) => (c > 1 ? `${n}x${c}` : n)).join(", ")
    : "";
}

function newEnv() {
  env = new DemoEnv($("scenario").value, 1);
  drawGrid(JSON.parse(env.render()));
}

const held = new Set();
function heldAction() {
  let bits = 0;
  if (held.has("ArrowUp")) bits |= 1;
  if (held.has("ArrowLeft")) bits |= 2;
  if (held.has("ArrowRight")) bits |= 4;
  if (held.has(" ")) bits |= 8;
  return bits % env.action_count();
}

function drawChart() {
  const canvas = $("chart");
  const ctx = canvas.getContext("2d");
  ctx.fillStyle = "#0d0e11";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  const series = [
    [chart.intrinsic, "#5b9bd5"],
    [chart.entropy, "#c2a25b"],
  ];
  for (const [data, color] of series) {
    if (data.length < 2) continue;
    const max = Math.max(...data), min = Math.min(...data);
    const span = max - min || 1;
    ctx.strokeStyle = color;
    ctx.beginPath();
    data.forEach((v, i) => {
      const x = (i / (data.length - 1)) * (canvas.width - 8) + 4;
      const y = canvas.height - 6 - ((v - min) / span) * (canvas.height - 12);
      i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
    });
    ctx.stroke();
  }
}

function drawHeatmap(roll) {
  const canvas = $("heatmap");
  const ctx = canvas.getContext("2d");
  const cell = Math.floor(Math.min(canvas.width / roll.width, canvas.height / roll.height));
  ctx.fillStyle = "#0d0e11";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  const clip = 0.025; // visitation ceiling, matching the heat map exporter
  for (let y = 0; y < roll.height; y++) {
    for (let x = 0; x < roll.width; x++) {
      const v = Math.min(roll.visitation[y * roll.width + x], clip) / clip;
      ctx.fillStyle = `rgb(${Math.round(30 + 220 * v)}, ${Math.round(30 + 80 * v)}, 40)`;
      ctx.fillRect(x * cell, y * cell, cell - 1, cell - 1);
    }
  }
}

function trainStep() {
  if (!training) return;
  const out = JSON.parse(trainer.run_updates(1));
  $("train-steps").textContent = out.step;
  $("train-episodes").textContent = out.episodes;
  $("train-entropy").textContent = out.entropy.toFixed(3);
  $("train-score").textContent =
    out.mean_episode_score === null ? "–" : out.mean_episode_score.toFixed(1);
  chart.intrinsic.push(out.mean_intrinsic);
  chart.entropy.push(out.entropy);
  if (chart.intrinsic.length > 400) {
    chart.intrinsic.shift();
    chart.entropy.shift();
  }
  drawChart();
  renderBars($("event-bars"), out.rarity.names, out.rarity.means, (v) => v.toFixed(2));
  requestAnimationFrame(trainStep);
}

function resetTrainer() {
  trainer = new DemoTrainer(
    $("train-scenario").value,
    $("train-mode").value,
    Number($("train-seed").value) | 0,
  );
  chart = { intrinsic: [], entropy: [] };
  $("train-rollout").disabled = false;
}

async function animateRollout() {
  const roll = JSON.parse(trainer.rollout((Math.random() * 1e6) | 0));
  drawHeatmap(roll);
  $("rollout-msg").textContent =
    `score ${roll.score.toFixed(1)} in ${roll.ticks} ticks; ` +
    (roll.events.length
      ? "events: " + roll.events.map(([n, c]) => `${n}x${c}`).join(", ")
      : "no events");
}

async function main() {
  await init();
  const scenarios = JSON.parse(list_scenarios());
  for (const sel of [$("scenario"), $("train-scenario")]) {
    for (const s of scenarios) {
      const opt = document.createElement("option");
      opt.value = s.name;
      opt.textContent = s.name;
      sel.appendChild(opt);
    }
  }
  newEnv();
  $("scenario").addEventListener("change", newEnv);
  $("reset").addEventListener("click", () => drawGrid(JSON.parse(env.reset())));

  window.addEventListener("keydown", (e) => {
    if (["ArrowUp", "ArrowLeft", "ArrowRight", " "].includes(e.key)) {
      e.preventDefault();
      held.add(e.key);
    }
  });
  window.addEventListener("keyup", (e) => held.delete(e.key));
  setInterval(() => {
    if (held.size === 0) return;
    updatePlayPanels(JSON.parse(env.step(heldAction())));
  }, 70);

  $("train-toggle").addEventListener("click", () => {
    if (!training) {
      if (!trainer) resetTrainer();
      training = true;
      $("train-toggle").textContent = "Pause training";
      requestAnimationFrame(trainStep);
    } else {
      training = false;
      $("train-toggle").textContent = "Resume training";
    }
  });
  for (const id of ["train-scenario", "train-mode", "train-seed"]) {
    $(id).addEventListener("change", () => {
      training = false;
      $("train-toggle").textContent = "Start training";
      trainer = null;
      $("train-rollout").disabled = true;
    });
  }
  $("train-rollout").addEventListener("click", animateRollout);
}

main();
