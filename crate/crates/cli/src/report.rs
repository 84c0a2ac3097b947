//! CSV renderings. Decimals carry 6 fractional digits; lines end in `\n`.

use std::fmt::Write;

use rwal::alloop::{CurveSummary, RunRecord};
use rwal::corpus::{CorpusStats, TagSet};

use crate::{AblationRow, GridRow};

pub const CURVE_HEADER: &str = "iteration,labeled_sentences,labeled_tokens,f1_mean,f1_ci95,gamma_mean,gamma_ci95,gamma_flag";

pub fn curve_csv(summary: &CurveSummary) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for p in &summary.points {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            p.iteration,
            p.labeled_sentences.round() as u64,
            p.labeled_tokens,
            p.f1.mean,
            p.f1.half_width,
            p.gamma.mean,
            p.gamma.half_width,
            p.gamma_flagged
        )
        .unwrap();
    }
    out
}

/// One row per trial and iteration, with per-class labeled token counts.
pub fn runs_csv(runs: &[RunRecord], tagset: &TagSet) -> String {
    let mut out =
        String::from("trial,seed,split_seed,iteration,labeled_sentences,labeled_tokens,queried,f1,gamma,gamma_flag,truncated");
    for class in tagset.classes() {
        write!(out, ",count_{class}").unwrap();
    }
    out.push('\n');
    for run in runs {
        for r in &run.iterations {
            write!(
                out,
                "{},{},{},{},{},{},{},{:.6},{:.6},{},{}",
                run.trial,
                run.seed,
                run.split_seed,
                r.iteration,
                r.labeled_sentences,
                r.labeled_tokens,
                r.queried,
                r.f1,
                r.gamma,
                u8::from(r.gamma_flag),
                u8::from(run.truncated)
            )
            .unwrap();
            for n in &r.class_counts {
                write!(out, ",{n}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

/// Final-iteration F1 per beta; `best` marks the highest mean (first on
/// ties).
pub fn grid_csv(rows: &[GridRow]) -> String {
    let finals: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| r.summary.last().map_or((0.0, 0.0), |p| (p.f1.mean, p.f1.half_width)))
        .collect();
    let best = finals
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |acc, (i, &(m, _))| match acc {
            Some((_, bm)) if bm >= m => acc,
            _ => Some((i, m)),
        })
        .map(|(i, _)| i);
    let mut out = String::from("beta,final_f1_mean,final_f1_ci,best\n");
    for (i, (row, (mean, ci))) in rows.iter().zip(finals).enumerate() {
        writeln!(out, "{:.6},{mean:.6},{ci:.6},{}", row.beta, u8::from(best == Some(i))).unwrap();
    }
    out
}

/// Mean ± CI per variant for iterations 1..=N.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("variant,beta,iteration,f1_mean,f1_ci95\n");
    for row in rows {
        for p in row.summary.points.iter().filter(|p| p.iteration > 0) {
            writeln!(out, "{},{:.6},{},{:.6},{:.6}", row.variant, row.beta, p.iteration, p.f1.mean, p.f1.half_width)
                .unwrap();
        }
    }
    out
}

pub fn stats_csv(stats: &CorpusStats, tagset: &TagSet) -> String {
    let mut out = String::from("key,value\n");
    writeln!(out, "sentences,{}", stats.sentence_count).unwrap();
    writeln!(out, "tokens,{}", stats.token_count).unwrap();
    writeln!(out, "average_length,{:.6}", stats.average_length).unwrap();
    writeln!(out, "b_fraction,{:.6}", stats.proportions.begin).unwrap();
    writeln!(out, "i_fraction,{:.6}", stats.proportions.inside).unwrap();
    writeln!(out, "o_fraction,{:.6}", stats.proportions.outside).unwrap();
    writeln!(out, "imbalance_ratio,{:.6}", stats.imbalance_ratio).unwrap();
    writeln!(out, "absent_classes,{}", u8::from(stats.absent_classes)).unwrap();
    for (class, n) in tagset.classes().iter().zip(&stats.class_counts.per_class) {
        writeln!(out, "count_{class},{n}").unwrap();
    }
    out
}
