//! End-to-end runs: basis, ordinal embedding, optional triple harvesting
//! and SOE, then evaluation against the hidden points.

use std::fmt;
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use crate::basis::{choose_basis, BasisConfig, BasisRun};
use crate::embed::{embed_all, embed_all_linear, OrdinalEmbedding};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::oracle::{GroundTruthOracle, LedgerSnapshot};
use crate::points::PointSet;
use crate::refine::{
    basis_chains, chain_triples, default_k, harvest_knn_chains, harvest_knn_triples, Encoding,
    HarvestMode, TripleSet,
};
use crate::soe::{soe_fit_doubling, SoeConfig, SoeResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Method {
    /// The ordinal embedding itself.
    #[default]
    #[serde(rename = "basis")]
    Basis,
    /// SOE over the triples the basis sorts produced.
    #[serde(rename = "basis+soe")]
    BasisSoe,
    /// SOE over basis triples plus sorted embedded neighbourhoods.
    #[serde(rename = "extra+soe")]
    ExtraSoe,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s {
            "basis" => Ok(Method::Basis),
            "basis+soe" => Ok(Method::BasisSoe),
            "extra+soe" => Ok(Method::ExtraSoe),
            other => Err(Error::InvalidArgument(format!(
                "unknown method `{other}` (expected basis, basis+soe or extra+soe)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Basis => "basis",
            Method::BasisSoe => "basis+soe",
            Method::ExtraSoe => "extra+soe",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub method: Method,
    pub seed: u64,
    pub basis: BasisConfig,
    /// Neighbourhood size for harvesting; `ceil(log2 n)` when unset.
    pub k: Option<usize>,
    pub harvest_mode: HarvestMode,
    /// How sorted chains become SOE input.
    pub encoding: Encoding,
    /// Starting SOE settings; `dim` is replaced by the basis estimate.
    pub soe: SoeConfig,
    pub linear_search_coords: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            method: Method::Basis,
            seed: 0,
            basis: BasisConfig::default(),
            k: None,
            harvest_mode: HarvestMode::Sort,
            encoding: Encoding::Dyadic,
            soe: SoeConfig::default(),
            linear_search_coords: false,
        }
    }
}

/// Cumulative ledger readings after each stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageLedger {
    pub after_basis: LedgerSnapshot,
    pub after_embed: LedgerSnapshot,
    pub after_refine: LedgerSnapshot,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub run: BasisRun,
    pub embedding: OrdinalEmbedding,
    /// Input handed to SOE, absent for the plain basis method.
    pub triples: Option<TripleSet>,
    /// One entry per SOE dimension tried; the last produced `positions`.
    pub soe_attempts: Vec<SoeResult>,
    pub positions: PointSet,
    pub report: EvalReport,
    pub ledger: StageLedger,
}

/// Runs the configured method against a ground-truth oracle over `points`.
pub fn run_pipeline(points: &PointSet, config: &PipelineConfig) -> Result<PipelineOutput> {
    let mut oracle = GroundTruthOracle::from_points(points.clone());
    let basis_config = BasisConfig {
        seed: config.seed,
        ..config.basis
    };
    let run = choose_basis(&mut oracle, &basis_config)?;
    let after_basis = oracle.ledger().snapshot();
    info!(
        "basis: d_hat = {} after {} comparisons",
        run.basis.dimension_estimate, after_basis.unique
    );

    let embedding = if config.linear_search_coords {
        embed_all_linear(&run.ranks, &run.basis.axes, &mut oracle)?
    } else {
        embed_all(&run)?
    };
    let after_embed = oracle.ledger().snapshot();
    let embedded = embedding.to_positions();

    let triples = match config.method {
        Method::Basis => None,
        Method::BasisSoe => Some(chain_triples(&basis_chains(&run.ranks)?, config.encoding)?),
        Method::ExtraSoe => {
            let mut set = chain_triples(&basis_chains(&run.ranks)?, config.encoding)?;
            let k = config.k.unwrap_or_else(|| default_k(points.len()));
            let extra = match config.harvest_mode {
                HarvestMode::Sort => {
                    chain_triples(&harvest_knn_chains(&embedded, &mut oracle, k)?, config.encoding)?
                }
                HarvestMode::Select => {
                    harvest_knn_triples(&embedded, &mut oracle, k, HarvestMode::Select)?
                }
            };
            set.extend(&extra);
            Some(set)
        }
    };
    let after_refine = oracle.ledger().snapshot();
    if let Some(set) = &triples {
        info!("refine: {} triples, {} comparisons in total", set.len(), after_refine.unique);
    }

    let (soe_attempts, positions) = match &triples {
        None => (Vec::new(), embedded),
        Some(set) => {
            let soe_config = SoeConfig {
                dim: run.basis.dimension_estimate.max(1),
                seed: config.seed,
                ..config.soe.clone()
            };
            let attempts = soe_fit_doubling(set, points.len(), &soe_config)?;
            for a in &attempts {
                info!("soe: dim {} loss {} converged {}", a.positions.dim(), a.final_loss, a.converged);
            }
            let positions = attempts.last().expect("at least one attempt").positions.clone();
            (attempts, positions)
        }
    };

    let mut report = evaluate(points, &positions, None)?;
    report.comparisons_unique = after_refine.unique;
    report.comparisons_total = after_refine.total;
    report.dimension_estimate = run.basis.dimension_estimate;

    Ok(PipelineOutput {
        run,
        embedding,
        triples,
        soe_attempts,
        positions,
        report,
        ledger: StageLedger {
            after_basis,
            after_embed,
            after_refine,
        },
    })
}
