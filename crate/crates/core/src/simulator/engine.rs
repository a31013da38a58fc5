use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::{Engine, RawCounts, SimConfig, TrueWindowStats};
use crate::domain::SourceParams;
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Fate {
    Lost,
    A { detected: bool },
    B { detected: bool },
}

#[derive(Debug, Clone, Copy)]
struct Idler {
    time: f64,
    id: u64,
    fate: Fate,
}

#[derive(Debug, Clone, Copy)]
struct Gate {
    open: f64,
    /// Id of the idler whose partner opened the gate; `None` for dark heralds.
    own: Option<u64>,
}

/// Per-photon and per-gate probabilities of the bench.
struct Bench {
    gamma: f64,
    splitter_t: f64,
    eta: f64,
    p_dark: f64,
    dead_time: f64,
    half_window: f64,
}

impl Bench {
    fn new(p: &SourceParams, dead_time: f64) -> Self {
        Bench {
            gamma: p.gamma,
            splitter_t: p.splitter_t,
            eta: p.eta_idler,
            p_dark: (p.dark_rate_idler * p.delta_t).min(1.0),
            dead_time,
            half_window: p.delta_t / 2.0,
        }
    }

    fn fate(&self, rng: &mut StreamRng) -> Fate {
        if rng.random::<f64>() >= self.gamma {
            return Fate::Lost;
        }
        let to_a = rng.random::<f64>() < self.splitter_t;
        let detected = rng.random::<f64>() < self.eta;
        if to_a {
            Fate::A { detected }
        } else {
            Fate::B { detected }
        }
    }
}

/// Arrival times of a Poisson process; rate zero never fires.
struct Arrivals {
    exp: Option<Exp<f64>>,
    next: f64,
}

impl Arrivals {
    fn new(rate: f64, start: f64, rng: &mut StreamRng) -> Self {
        let exp = (rate > 0.0).then(|| Exp::new(rate).expect("positive finite rate"));
        let mut a = Arrivals { exp, next: start };
        a.advance(rng);
        a
    }

    fn advance(&mut self, rng: &mut StreamRng) {
        self.next = match &self.exp {
            Some(exp) => self.next + exp.sample(rng),
            None => f64::INFINITY,
        };
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum HeraldKind {
    Pair,
    Dark,
}

/// Merged herald stream on `[0, duration)`: signal-photon heralds and
/// trigger dark counts.
struct Heralds {
    pairs: Arrivals,
    darks: Arrivals,
    duration: f64,
}

impl Heralds {
    fn new(p: &SourceParams, duration: f64, rng: &mut StreamRng) -> Self {
        Heralds {
            pairs: Arrivals::new(p.pair_herald_rate(), 0.0, rng),
            darks: Arrivals::new(p.dark_rate_trigger, 0.0, rng),
            duration,
        }
    }

    fn next(&mut self, rng: &mut StreamRng) -> Option<(f64, HeraldKind)> {
        let (stream, kind) = if self.pairs.next <= self.darks.next {
            (&mut self.pairs, HeraldKind::Pair)
        } else {
            (&mut self.darks, HeraldKind::Dark)
        };
        let t = stream.next;
        if t >= self.duration {
            return None;
        }
        stream.advance(rng);
        Some((t, kind))
    }
}

struct Tally {
    counts: RawCounts,
    truth: TrueWindowStats,
    last_fire: [f64; 2],
}

impl Tally {
    fn new(duration: f64) -> Self {
        Tally {
            counts: RawCounts { duration, ..Default::default() },
            truth: TrueWindowStats::default(),
            last_fire: [f64::NEG_INFINITY; 2],
        }
    }

    fn close<'a, I>(&mut self, gate: &Gate, photons: I, bench: &Bench, rng: &mut StreamRng)
    where
        I: IntoIterator<Item = &'a Idler>,
    {
        let lo = gate.open - bench.half_window;
        let hi = gate.open + bench.half_window;
        let mut surviving = 0usize;
        let mut accidental = 0usize;
        let mut fired = [false; 2];
        for ph in photons {
            if ph.time < lo || ph.time >= hi {
                continue;
            }
            match ph.fate {
                Fate::Lost => continue,
                Fate::A { detected } => {
                    self.truth.branch_a += 1;
                    fired[0] |= detected;
                }
                Fate::B { detected } => {
                    self.truth.branch_b += 1;
                    fired[1] |= detected;
                }
            }
            surviving += 1;
            if gate.own != Some(ph.id) {
                accidental += 1;
            }
        }
        if bench.p_dark > 0.0 {
            for f in &mut fired {
                if rng.random::<f64>() < bench.p_dark {
                    *f = true;
                }
            }
        }
        if bench.dead_time > 0.0 {
            for (f, last) in fired.iter_mut().zip(&mut self.last_fire) {
                if *f {
                    if gate.open - *last < bench.dead_time {
                        *f = false;
                    } else {
                        *last = gate.open;
                    }
                }
            }
        }

        let c = &mut self.counts;
        c.heralds += 1;
        c.gates_opened += 1;
        c.singles += u64::from(fired[0]) + u64::from(fired[1]);
        if fired[0] && fired[1] {
            c.coincidences += 1;
        }
        if fired[0] || fired[1] {
            c.gates_with_detection += 1;
        }
        if gate.own.is_some() {
            self.truth.heralded_gates += 1;
        }
        bump(&mut self.truth.histogram, surviving);
        bump(&mut self.truth.accidental_histogram, accidental);
    }
}

fn bump(h: &mut Vec<u64>, k: usize) {
    if h.len() <= k {
        h.resize(k + 1, 0);
    }
    h[k] += 1;
}

pub(super) fn run(config: &SimConfig, rng: &mut StreamRng) -> (RawCounts, TrueWindowStats) {
    let tally = match config.engine {
        Engine::GateRestricted => gate_restricted(config, rng),
        Engine::FullTimeline => full_timeline(config, rng),
    };
    (tally.counts, tally.truth)
}

/// Draws heralds first, then populates only the union of their windows with
/// non-heralding pairs. Heralding and non-heralding pairs are independent
/// thinnings of the pair process.
fn gate_restricted(config: &SimConfig, rng: &mut StreamRng) -> Tally {
    let p = &config.params;
    let bench = Bench::new(p, config.dead_time);
    let half = bench.half_window;
    let free_rate = p.mu * (1.0 - p.herald_probability());
    let free_exp = (free_rate > 0.0).then(|| Exp::new(free_rate).expect("positive finite rate"));

    let mut tally = Tally::new(config.duration);
    let mut heralds = Heralds::new(p, config.duration, rng);
    let mut gates: Vec<Gate> = Vec::new();
    let mut photons: Vec<Idler> = Vec::new();
    let mut next_id = 0u64;

    let mut next = heralds.next(rng);
    while let Some((t0, kind0)) = next {
        gates.clear();
        photons.clear();

        // One segment: a maximal run of mutually overlapping windows.
        let seg_start = t0 - half;
        let mut seg_end = t0 + half;
        let mut pending = Some((t0, kind0));
        while let Some((t, kind)) = pending {
            let own = (kind == HeraldKind::Pair).then(|| {
                let id = next_id;
                next_id += 1;
                photons.push(Idler { time: t, id, fate: bench.fate(rng) });
                id
            });
            gates.push(Gate { open: t, own });
            seg_end = t + half;
            next = heralds.next(rng);
            pending = match next {
                Some((t, _)) if t < seg_end => next,
                _ => None,
            };
        }

        if let Some(exp) = &free_exp {
            let mut t = seg_start + exp.sample(rng);
            while t < seg_end {
                photons.push(Idler { time: t, id: next_id, fate: bench.fate(rng) });
                next_id += 1;
                t += exp.sample(rng);
            }
        }

        for gate in &gates {
            tally.close(gate, &photons, &bench, rng);
        }
    }
    tally
}

/// Walks every pair in time order, keeping only the photons that an open or
/// future gate can still reach.
fn full_timeline(config: &SimConfig, rng: &mut StreamRng) -> Tally {
    let p = &config.params;
    let bench = Bench::new(p, config.dead_time);
    let half = bench.half_window;
    let duration = config.duration;
    let herald_probability = p.herald_probability();

    let mut tally = Tally::new(duration);
    let mut pairs = Arrivals::new(p.mu, -half, rng);
    let mut darks = Arrivals::new(p.dark_rate_trigger, 0.0, rng);
    let mut pending: VecDeque<Gate> = VecDeque::new();
    let mut recent: VecDeque<Idler> = VecDeque::new();
    let mut next_id = 0u64;

    loop {
        let pair_t = if pairs.next < duration + half { pairs.next } else { f64::INFINITY };
        let dark_t = if darks.next < duration { darks.next } else { f64::INFINITY };
        let now = pair_t.min(dark_t);

        while let Some(gate) = pending.front() {
            if gate.open + half > now {
                break;
            }
            let gate = pending.pop_front().expect("front exists");
            tally.close(&gate, &recent, &bench, rng);
        }
        if now == f64::INFINITY {
            break;
        }

        let horizon = pending.front().map_or(now, |g| g.open.min(now)) - half;
        while recent.front().is_some_and(|ph| ph.time < horizon) {
            recent.pop_front();
        }

        if pair_t <= dark_t {
            let heralded =
                (0.0..duration).contains(&pair_t) && rng.random::<f64>() < herald_probability;
            let fate = bench.fate(rng);
            let id = next_id;
            next_id += 1;
            if fate != Fate::Lost {
                recent.push_back(Idler { time: pair_t, id, fate });
            }
            if heralded {
                pending.push_back(Gate { open: pair_t, own: Some(id) });
            }
            pairs.advance(rng);
        } else {
            pending.push_back(Gate { open: dark_t, own: None });
            darks.advance(rng);
        }
    }
    tally
}
