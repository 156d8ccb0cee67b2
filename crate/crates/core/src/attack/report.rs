use std::io::Write;

use serde::{Deserialize, Serialize};

use super::AttackError;
use crate::types::{Feerate, Height, Sat, Weight};

/// Block-level activity during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub height: Height,
    pub block_weight_used: Weight,
    pub victim_tx_confirmed: u32,
    pub attacker_tx_confirmed: u32,
}

/// One accepted attacker replacement and what it had to beat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacementRecord {
    pub height: Height,
    pub fee: Sat,
    pub feerate: Feerate,
    pub evicted_fees: Sat,
    pub max_evicted_rate: Feerate,
}

impl ReplacementRecord {
    pub fn dominates(&self) -> bool {
        self.fee > self.evicted_fees && self.feerate > self.max_evicted_rate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub n_channels: u32,
    pub htlcs_per_channel: u32,
    pub htlc_value: Sat,
    pub channel_feerate: Feerate,
    pub close_delta: u32,
    pub total_htlcs: u64,
    /// Claimed by the attacker's timeout after the victim learned the
    /// preimage.
    pub stolen_htlcs: u64,
    pub victim_claimed_htlcs: u64,
    pub unresolved_htlcs: u64,
    pub stolen_value: Sat,
    pub victim_fees_paid: Sat,
    /// Funding fees, commitment fees and timeout-claim fees.
    pub attacker_cost: Sat,
    pub final_height: Height,
    /// Victim HTLC-success submissions at or after expiry that did not
    /// replace one already pending.
    pub late_victim_submissions: u64,
    pub attacker_rejections: u64,
    pub heights_audited: u32,
    pub replacements: Vec<ReplacementRecord>,
    pub trace: Vec<TraceRow>,
}

impl AttackReport {
    /// The attacker spent less than it stole, checked once more than one
    /// channel's worth of HTLCs was taken.
    pub fn economically_sane(&self) -> bool {
        self.stolen_htlcs <= self.htlcs_per_channel as u64 || self.attacker_cost < self.stolen_value
    }

    pub fn accounting_balances(&self) -> bool {
        self.stolen_htlcs + self.victim_claimed_htlcs + self.unresolved_htlcs == self.total_htlcs
    }
}

#[derive(Serialize)]
struct ReportCsvRow {
    n_channels: u32,
    total_htlcs: u64,
    stolen_htlcs: u64,
    victim_claimed_htlcs: u64,
    unresolved_htlcs: u64,
    htlc_value_sat: Sat,
    stolen_value_sat: Sat,
    victim_fees_paid_sat: Sat,
    attacker_cost_sat: Sat,
}

impl From<&AttackReport> for ReportCsvRow {
    fn from(r: &AttackReport) -> Self {
        Self {
            n_channels: r.n_channels,
            total_htlcs: r.total_htlcs,
            stolen_htlcs: r.stolen_htlcs,
            victim_claimed_htlcs: r.victim_claimed_htlcs,
            unresolved_htlcs: r.unresolved_htlcs,
            htlc_value_sat: r.htlc_value,
            stolen_value_sat: r.stolen_value,
            victim_fees_paid_sat: r.victim_fees_paid,
            attacker_cost_sat: r.attacker_cost,
        }
    }
}

/// One row per report.
pub fn write_report_csv<'a, W, I>(reports: I, out: W) -> Result<(), AttackError>
where
    W: Write,
    I: IntoIterator<Item = &'a AttackReport>,
{
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(ReportCsvRow::from(r))?;
    }
    w.flush().map_err(|e| AttackError::Csv(e.to_string()))
}

/// `height,block_weight_used,victim_tx_confirmed,attacker_tx_confirmed`.
pub fn write_trace_csv<W: Write>(report: &AttackReport, out: W) -> Result<(), AttackError> {
    let mut w = csv::Writer::from_writer(out);
    for row in &report.trace {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| AttackError::Csv(e.to_string()))
}

/// Traces of several runs, prefixed with their channel count.
pub fn write_sweep_trace_csv<'a, W, I>(reports: I, out: W) -> Result<(), AttackError>
where
    W: Write,
    I: IntoIterator<Item = &'a AttackReport>,
{
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record([
        "n_channels",
        "height",
        "block_weight_used",
        "victim_tx_confirmed",
        "attacker_tx_confirmed",
    ])?;
    for r in reports {
        for t in &r.trace {
            w.serialize((
                r.n_channels,
                t.height,
                t.block_weight_used,
                t.victim_tx_confirmed,
                t.attacker_tx_confirmed,
            ))?;
        }
    }
    w.flush().map_err(|e| AttackError::Csv(e.to_string()))
}
