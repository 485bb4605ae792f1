use std::sync::Arc;

use parking_lot::Mutex;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::GatewayError;

/// Token counts reported by a provider for one request. Signed so that a
/// misbehaving provider's negative counts can be detected and refused.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: i64,
    pub completion_tokens: i64,
}

impl TokenUsage {
    pub fn new(prompt_tokens: i64, completion_tokens: i64) -> Self {
        TokenUsage {
            prompt_tokens,
            completion_tokens,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetDecision {
    Continue,
    Kill,
}

/// Running token and dollar totals for one run. `dollar_limit` of `None`
/// means unlimited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    #[serde(with = "rust_decimal::serde::str")]
    pub price_per_prompt_token: Decimal,
    #[serde(with = "rust_decimal::serde::str")]
    pub price_per_completion_token: Decimal,
    #[serde(with = "rust_decimal::serde::str_option")]
    pub dollar_limit: Option<Decimal>,
    #[serde(with = "rust_decimal::serde::str")]
    pub accumulated_cost: Decimal,
    pub killed: bool,
}

impl CostLedger {
    pub fn new(price_per_prompt_token: Decimal, price_per_completion_token: Decimal, dollar_limit: Option<Decimal>) -> Self {
        CostLedger {
            prompt_tokens: 0,
            completion_tokens: 0,
            price_per_prompt_token,
            price_per_completion_token,
            dollar_limit,
            accumulated_cost: Decimal::ZERO,
            killed: false,
        }
    }

    pub fn unlimited() -> Self {
        CostLedger::new(Decimal::ZERO, Decimal::ZERO, None)
    }

    /// Adds one response's usage and decides whether the run may continue.
    /// The kill fires as soon as the accumulated cost is strictly above the
    /// limit and is sticky afterwards.
    pub fn record(&mut self, usage: TokenUsage) -> Result<BudgetDecision, GatewayError> {
        if usage.prompt_tokens < 0 || usage.completion_tokens < 0 {
            return Err(GatewayError::Accounting(format!(
                "negative token usage reported: prompt={}, completion={}",
                usage.prompt_tokens, usage.completion_tokens
            )));
        }
        self.prompt_tokens += usage.prompt_tokens as u64;
        self.completion_tokens += usage.completion_tokens as u64;
        self.accumulated_cost = Decimal::from(self.prompt_tokens) * self.price_per_prompt_token
            + Decimal::from(self.completion_tokens) * self.price_per_completion_token;
        if let Some(limit) = self.dollar_limit {
            if self.accumulated_cost > limit {
                self.killed = true;
            }
        }
        Ok(self.decision())
    }

    pub fn decision(&self) -> BudgetDecision {
        if self.killed {
            BudgetDecision::Kill
        } else {
            BudgetDecision::Continue
        }
    }
}

/// A ledger shared by every worker of a run. Updates are serialized so the
/// kill decision is made against a consistent total.
#[derive(Debug, Clone)]
pub struct SharedLedger(Arc<Mutex<CostLedger>>);

impl SharedLedger {
    pub fn new(ledger: CostLedger) -> Self {
        SharedLedger(Arc::new(Mutex::new(ledger)))
    }

    pub fn record_usage_and_check_budget(&self, usage: TokenUsage) -> Result<BudgetDecision, GatewayError> {
        self.0.lock().record(usage)
    }

    pub fn is_killed(&self) -> bool {
        self.0.lock().killed
    }

    pub fn snapshot(&self) -> CostLedger {
        self.0.lock().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::str::FromStr;

    fn d(s: &str) -> Decimal {
        Decimal::from_str(s).unwrap()
    }

    #[test]
    fn cost_is_exact() {
        let mut l = CostLedger::new(d("0.000003"), d("0.000015"), Some(d("1")));
        l.record(TokenUsage::new(1000, 200)).unwrap();
        assert_eq!(l.accumulated_cost, d("0.006"));
    }

    #[test]
    fn kill_is_strictly_above_limit_and_sticky() {
        let mut l = CostLedger::new(d("0.01"), d("0"), Some(d("0.05")));
        assert_eq!(l.record(TokenUsage::new(5, 0)).unwrap(), BudgetDecision::Continue);
        assert_eq!(l.accumulated_cost, d("0.05"));
        assert_eq!(l.record(TokenUsage::new(1, 0)).unwrap(), BudgetDecision::Kill);
        assert_eq!(l.record(TokenUsage::new(0, 0)).unwrap(), BudgetDecision::Kill);
    }

    #[test]
    fn zero_usage_leaves_ledger_unchanged() {
        let mut l = CostLedger::new(d("0.01"), d("0.02"), Some(d("1")));
        let before = l.clone();
        assert_eq!(l.record(TokenUsage::default()).unwrap(), BudgetDecision::Continue);
        assert_eq!(l, before);
    }

    #[test]
    fn negative_usage_is_an_accounting_error() {
        let mut l = CostLedger::unlimited();
        let err = l.record(TokenUsage::new(-1, 0)).unwrap_err();
        assert_eq!(err.kind(), "AccountingError");
        assert_eq!(l.prompt_tokens, 0);
    }

    #[test]
    fn serializes_money_as_strings() {
        let l = CostLedger::new(d("0.1"), d("0.2"), None);
        let json = serde_json::to_string(&l).unwrap();
        assert!(json.contains("\"0.1\""));
        assert_eq!(serde_json::from_str::<CostLedger>(&json).unwrap(), l);
    }

    proptest! {
        #[test]
        fn accumulated_cost_matches_totals(usages in prop::collection::vec((0i64..5000, 0i64..5000), 0..40)) {
            let pin = d("0.0000025");
            let pout = d("0.00001");
            let mut l = CostLedger::new(pin, pout, None);
            let (mut p, mut c) = (0i64, 0i64);
            for (a, b) in usages {
                l.record(TokenUsage::new(a, b)).unwrap();
                p += a;
                c += b;
            }
            prop_assert_eq!(l.accumulated_cost, Decimal::from(p) * pin + Decimal::from(c) * pout);
            prop_assert!(!l.killed);
        }
    }
}
