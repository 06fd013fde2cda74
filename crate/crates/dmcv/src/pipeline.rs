//! The protocol run: test split, Energy and Acceptance tests, key map,
//! reconciliation, verification and privacy amplification.

use std::collections::HashMap;
use std::f64::consts::{SQRT_2, TAU};
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use dmcv_core::budget::{b_pa_from_eps, epsilon_ec, epsilon_total};
use dmcv_core::keymap::{gray_bits, map_frame, snr_estimate, BOT};
use dmcv_core::keyrate::corrections::{key_length, KeyLengthInputs};
use dmcv_core::postproc::bsc::crossover_from_snr;
use dmcv_core::postproc::ldpc::{ldpc_construct, LdpcCode};
use dmcv_core::postproc::rates::select_rate;
use dmcv_core::postproc::toeplitz::{generator_bytes, toeplitz_apply};
use dmcv_core::simulator::{prepare, transmit_measure, SymbolFrame};
use dmcv_core::statproc::{
    displaced_moments, energy_test_epsilon_for, run_acceptance_test, run_energy_test, sample_test_mask, split_frame,
    trusted_moments, AcceptanceSet, EnergyTestSpec,
};
use dmcv_core::units::NuSample;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::characterize::{channel_model, characterize, constellation, hex, Characterization};
use crate::config::Config;
use crate::error::Result;
use crate::formats::{pack_bits, write_file, write_json};
use crate::keyrate::{key_rate, KeyRateResult};
use crate::reconcile::{derive_seed, reconcile, theoretical, ReconcileInputs, Reconciled};
use crate::report::{Corrections, EpsilonLedger, RunReport, Status, SweepRow};
use crate::transcript::{Message, Transcript};

const TAG_TEST: u64 = 1;
const TAG_HASH: u64 = 2;
const TAG_PA: u64 = 3;
const TAG_INJECT: u64 = 1 << 32;
const TAG_PHASE: u64 = 2 << 32;

/// A run's frame: the configured channel with `attack.xi_factor` applied and
/// `attack.injected` outcomes replaced by pulses of |γ| = `injected_amplitude`.
pub fn simulate_run_frame(cfg: &Config, seed: u64) -> Result<SymbolFrame> {
    let p = &cfg.params;
    let spec = constellation(p);
    let labels = prepare(p.n_total as usize, &spec, seed)?;
    let mut frame = transmit_measure(&labels, &spec, &channel_model(p, cfg.attack.xi_factor), seed)?;
    let a = SQRT_2 * cfg.attack.injected_amplitude;
    for i in 0..cfg.attack.injected as u64 {
        let k = (derive_seed(seed, TAG_INJECT + i) % frame.len() as u64) as usize;
        let phi = (derive_seed(seed, TAG_PHASE + i) >> 11) as f64 / (1u64 << 53) as f64 * TAU;
        frame.outcomes[k] = NuSample { q: a * phi.cos(), p: a * phi.sin() };
    }
    Ok(frame)
}

pub struct RunOutput {
    pub report: RunReport,
    pub transcript: Transcript,
    /// Final key bits, identical on both sides when `report.keys_match`.
    pub key: Option<Vec<u8>>,
}

type Slot<T> = Arc<OnceLock<std::result::Result<Arc<T>, String>>>;

/// A configuration with its characterization, plus bounds and codes that
/// are computed on first use and shared across runs.
pub struct Session {
    pub cfg: Config,
    pub ch: Characterization,
    qre: Mutex<HashMap<u64, Slot<KeyRateResult>>>,
    codes: Mutex<HashMap<u64, Slot<LdpcCode>>>,
}

fn cached<T>(map: &Mutex<HashMap<u64, Slot<T>>>, key: u64, make: impl FnOnce() -> Result<T>) -> Result<Arc<T>> {
    let slot = map.lock().expect("cache lock").entry(key).or_default().clone();
    slot.get_or_init(|| make().map(Arc::new).map_err(|e| e.to_string()))
        .clone()
        .map_err(crate::Error::Config)
}

impl Session {
    pub fn new(cfg: Config) -> Result<Self> {
        let ch = characterize(&cfg)?;
        Ok(Self::with_characterization(cfg, ch))
    }

    pub fn with_characterization(cfg: Config, ch: Characterization) -> Self {
        Self { cfg, ch, qre: Mutex::default(), codes: Mutex::default() }
    }

    /// Entropy bound at postselection radius `delta_r`.
    pub fn qre(&self, delta_r: f64) -> Result<Arc<KeyRateResult>> {
        cached(&self.qre, delta_r.to_bits(), || {
            let mut cfg = self.cfg.clone();
            cfg.params.delta_r = delta_r;
            key_rate(&cfg, &self.ch)
        })
    }

    pub fn code(&self, rate: f64) -> Result<Arc<LdpcCode>> {
        cached(&self.codes, rate.to_bits(), || {
            Ok(ldpc_construct(rate, self.cfg.params.l_ldpc, self.cfg.reconciliation.code_seed)?)
        })
    }

    pub fn run(&self, seed: u64) -> Result<RunOutput> {
        let frame = simulate_run_frame(&self.cfg, seed)?;
        self.run_on_frame(&frame, seed, self.cfg.params.delta_r)
    }

    pub fn run_on_frame(&self, frame: &SymbolFrame, seed: u64, delta_r: f64) -> Result<RunOutput> {
        let cfg = &self.cfg;
        let p = &cfg.params;
        let mut transcript = Transcript::default();
        let test_seed = derive_seed(seed, TAG_TEST);
        let k_t = (p.k_t() as usize).min(frame.len());
        let mask = sample_test_mask(frame.len(), k_t, test_seed)?;
        let (test, key) = split_frame(frame, &mask)?;
        transcript.push(Message::TestSelection { seed: test_seed, count: k_t as u64 });

        let et_spec = EnergyTestSpec { beta_test: p.beta_test, k_t: k_t as u64, l_t: p.l_t(), w: p.w, n_c: p.n_c };
        let energy_test = run_energy_test(&test.outcomes, &et_spec)?;
        let mut report = RunReport {
            status: Status::AbortEnergy,
            seed,
            params: { let mut q = p.clone(); q.delta_r = delta_r; q },
            certified: cfg.certified(),
            characterization: self.ch.hash.clone(),
            test_symbols: k_t as u64,
            key_symbols: key.len() as u64,
            energy_test,
            acceptance_test: None,
            moments: None,
            r_perp: None,
            snr: None,
            crossover: None,
            qre: None,
            corrections: None,
            reconciliation: None,
            ec_leak_bits: None,
            fail_charge: None,
            simulated_leakage: cfg.reconciliation.efficiency.is_some(),
            leakage: None,
            key_length: None,
            epsilon: None,
            key_digest: None,
            keys_match: None,
        };
        if !energy_test.pass {
            return Ok(RunOutput { report, transcript, key: None });
        }

        let moments = trusted_moments(&displaced_moments(&test)?, p.eta_d, p.nu_el)?;
        let set = AcceptanceSet::new(self.ch.trusted.observables(), p.m, k_t as u64, cfg.budget.eps_at, p.t_f, true)?;
        let at = run_acceptance_test(&moments, &set)?;
        let passed = at.pass;
        report.acceptance_test = Some(at);
        report.moments = Some(moments);
        if !passed {
            report.status = Status::AbortAcceptance;
            return Ok(RunOutput { report, transcript, key: None });
        }

        // Bob's key map; ⊥ positions are announced and Alice drops them too.
        let ks = map_frame(&key, delta_r, p.m)?;
        let bot: Vec<u8> = ks.symbols.iter().map(|&s| u8::from(s == BOT)).collect();
        transcript.push(Message::Sifting { symbols: ks.len() as u64, mask: pack_bits(&bot) });
        let bob_bits = ks.kept_bits();
        let mut alice_bits = Vec::with_capacity(bob_bits.len());
        for (&x, &s) in key.labels.iter().zip(&ks.symbols) {
            if s != BOT {
                alice_bits.extend_from_slice(&gray_bits(x));
            }
        }
        report.r_perp = Some(ks.r_perp);
        let snr = snr_estimate(&test, delta_r, p.m)?.snr;
        let crossover = crossover_from_snr(snr);
        report.snr = Some(snr);
        report.crossover = Some(crossover);

        let kr = self.qre(delta_r)?;
        let qre = kr.bound.lower;
        report.qre = Some(kr.bound);
        report.corrections = Some(Corrections { delta_w: kr.delta_w, delta_aep: kr.delta_aep });
        let n = ks.len() as u64;
        let fail_charge = if ks.r_perp < 1.0 {
            ((qre - kr.delta_w - kr.delta_aep) / (2.0 * (1.0 - ks.r_perp))).clamp(0.0, 1.0)
        } else {
            0.0
        };

        let rec: Reconciled = match cfg.reconciliation.efficiency {
            Some(beta) => theoretical(bob_bits.len(), p.l_ldpc, crossover, beta, n)?,
            None => {
                let rate = cfg.reconciliation.rate.or_else(|| select_rate(snr, cfg.reconciliation.backoff));
                let Some(rate) = rate else {
                    report.status = Status::AbortLength;
                    return Ok(RunOutput { report, transcript, key: None });
                };
                let code = self.code(rate)?;
                let inputs = ReconcileInputs {
                    alice: &alice_bits,
                    bob: &bob_bits,
                    code: &code,
                    p: crossover,
                    b_ev: p.b_ev,
                    hash_seed: derive_seed(seed, TAG_HASH),
                    max_iter: cfg.reconciliation.max_iter,
                    fail_charge,
                    n_symbols: n,
                };
                reconcile(&inputs, &mut transcript)?
            }
        };
        report.reconciliation = Some(rec.report.clone());
        report.ec_leak_bits = Some(rec.leak_bits);
        report.fail_charge = Some(fail_charge);

        let kl = key_length(&KeyLengthInputs {
            qre_lower: qre,
            delta_w: kr.delta_w,
            delta_aep: kr.delta_aep,
            ec_leak: rec.report.ec_leak_bits_per_symbol,
            n: n as f64,
            n_total: p.n_total as f64,
            n_blocks: rec.tags_sent,
            b_hash: p.b_ev,
            b_pa: p.b_pa,
        })?;
        let b = &cfg.budget;
        let eps_ec = epsilon_ec(p.b_ev, p.l_ldpc, rec.report.b_cor as usize);
        let eps_et = energy_test_epsilon_for(&et_spec).ok();
        let b_pa_required = b_pa_from_eps(b.eps_pa)?;
        report.epsilon = Some(EpsilonLedger {
            budget: *b,
            total: epsilon_total(b)?,
            eps_ec,
            eps_et,
            b_pa_required,
            within_caps: eps_ec <= b.eps_ec_max && eps_et.is_some_and(|e| e <= b.eps_et) && p.b_pa >= b_pa_required,
        });
        report.key_length = Some(kl);
        if kl.abort {
            report.status = Status::AbortLength;
            report.leakage = Some(transcript.audit());
            return Ok(RunOutput { report, transcript, key: None });
        }
        report.status = Status::Key;
        if cfg.reconciliation.efficiency.is_some() {
            report.leakage = Some(transcript.audit());
            return Ok(RunOutput { report, transcript, key: None });
        }

        let out_len = (kl.bits as usize).min(rec.bob.len());
        let generator = generator_bytes((rec.bob.len() + out_len).saturating_sub(1), derive_seed(seed, TAG_PA));
        let key_b = toeplitz_apply(&rec.bob, out_len, &generator)?;
        let key_a = toeplitz_apply(&rec.alice, out_len, &generator)?;
        transcript.push(Message::PrivacyAmplification { generator, out_len: out_len as u64 });
        report.leakage = Some(transcript.audit());
        report.keys_match = Some(key_a == key_b);
        report.key_digest = Some(hex(&Sha256::digest(pack_bits(&key_b))));
        Ok(RunOutput { report, transcript, key: Some(key_b) })
    }

    /// One run per radius on a shared frame; radii run in parallel.
    pub fn sweep(&self, grid: &[f64], seed: u64) -> Result<Vec<(SweepRow, RunReport)>> {
        let frame = simulate_run_frame(&self.cfg, seed)?;
        grid.par_iter()
            .map(|&d| {
                let out = self.run_on_frame(&frame, seed, d)?;
                Ok((SweepRow::from_report(d, &out.report), out.report))
            })
            .collect()
    }
}

/// Loads the configuration, runs the protocol once with the configured seed
/// and writes `report.json`, `transcript.bin`, the characterization and, on
/// success, `key.bin` into `out`.
pub fn run_pipeline(config: &Path, out: &Path) -> Result<RunReport> {
    let cfg = Config::load(config)?;
    std::fs::create_dir_all(out).map_err(crate::error::io_err(out))?;
    let session = Session::new(cfg)?;
    session.ch.store(out)?;
    let res = session.run(session.cfg.seed)?;
    write_outputs(out, &res)?;
    Ok(res.report)
}

pub fn write_outputs(out: &Path, res: &RunOutput) -> Result<()> {
    write_json(&out.join("report.json"), &res.report)?;
    write_file(&out.join("transcript.bin"), &res.transcript.encode())?;
    let key_path = out.join("key.bin");
    match (&res.key, res.report.keys_match) {
        (Some(k), Some(true)) => write_file(&key_path, &pack_bits(k))?,
        _ => {
            // a stale key from an earlier run must not survive an abort
            if key_path.exists() {
                std::fs::remove_file(&key_path).map_err(crate::error::io_err(&key_path))?;
            }
        }
    }
    Ok(())
}
