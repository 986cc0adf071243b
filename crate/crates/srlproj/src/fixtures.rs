//! Bundled canonical model texts, shared by the library, the CLI `repro`
//! command, and the test suites.

pub const BLOCK_RBN: &str = include_str!("../fixtures/block.rbn");
pub const NOISYOR_RBN: &str = include_str!("../fixtures/noisyor.rbn");
pub const SHARED_PARAM_RBN: &str = include_str!("../fixtures/shared_param.rbn");
pub const TWO_PARAM_RBN: &str = include_str!("../fixtures/two_param.rbn");
pub const ER_RBN: &str = include_str!("../fixtures/er.rbn");
pub const BLOCK_PARAM_RBN: &str = include_str!("../fixtures/block_param.rbn");
pub const HOMOPHILY_MLN: &str = include_str!("../fixtures/homophily.mln");
pub const EQ6_MLN: &str = include_str!("../fixtures/eq6.mln");
pub const PROJECTIVE_MLN: &str = include_str!("../fixtures/projective.mln");
pub const RED_EDGE_PLP: &str = include_str!("../fixtures/red_edge.plp");
pub const LATENT_RULE_PLP: &str = include_str!("../fixtures/latent_rule.plp");
pub const HALF_RED_N4_WORLD: &str = include_str!("../fixtures/half_red_n4.world");
