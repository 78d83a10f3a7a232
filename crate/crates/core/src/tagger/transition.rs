use alloc::vec;
use alloc::vec::Vec;

use super::scheme::{Action, LabelScheme};

/// Decoder state between two tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TransitionState {
    pub position: usize,
    pub open_entity: Option<usize>,
}

impl TransitionState {
    /// State after taking `action` at the current position.
    pub fn apply(self, action: Action) -> TransitionState {
        let open_entity = match action {
            Action::Begin(l) | Action::Inside(l) => Some(l),
            Action::Out | Action::Last(_) | Action::Unit(_) => None,
        };
        TransitionState {
            position: self.position + 1,
            open_entity,
        }
    }
}

/// Mark legal actions in `mask` (length = action count).
///
/// With no open entity: `O`, `U-*` and, unless this is the last token, `B-*`.
/// With entity `l` open: `L-l` and, unless this is the last token, `I-l`.
pub fn valid_mask(state: TransitionState, scheme: &LabelScheme, is_last: bool, mask: &mut [bool]) {
    mask.fill(false);
    match state.open_entity {
        None => {
            mask[Action::Out.index()] = true;
            for l in 0..scheme.labels().len() {
                mask[Action::Unit(l).index()] = true;
                if !is_last {
                    mask[Action::Begin(l).index()] = true;
                }
            }
        }
        Some(l) => {
            mask[Action::Last(l).index()] = true;
            if !is_last {
                mask[Action::Inside(l).index()] = true;
            }
        }
    }
}

pub fn valid_actions(state: TransitionState, scheme: &LabelScheme, is_last: bool) -> Vec<Action> {
    let mut mask = vec![false; scheme.action_count()];
    valid_mask(state, scheme, is_last, &mut mask);
    mask.iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| Action::from_index(i))
        .collect()
}

/// Greedy left-to-right decoding over `len` tokens. `score` receives the
/// position and the previous action and fills one score per action; illegal
/// actions are ignored and ties go to the lowest action index.
pub fn greedy_decode<F>(len: usize, scheme: &LabelScheme, mut score: F) -> Vec<Action>
where
    F: FnMut(usize, Option<Action>, &mut [f32]),
{
    let count = scheme.action_count();
    let mut mask = vec![false; count];
    let mut scores = vec![0.0f32; count];
    let mut state = TransitionState::default();
    let mut prev = None;
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        valid_mask(state, scheme, i + 1 == len, &mut mask);
        score(i, prev, &mut scores);
        let mut best: Option<(usize, f32)> = None;
        for (a, (&s, &ok)) in scores.iter().zip(&mask).enumerate() {
            if ok && best.is_none_or(|(_, b)| s > b || (b.is_nan() && !s.is_nan())) {
                best = Some((a, s));
            }
        }
        let action = Action::from_index(best.expect("at least one legal action").0);
        out.push(action);
        state = state.apply(action);
        prev = Some(action);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scheme() -> LabelScheme {
        LabelScheme::new(&["CHEMICAL", "DISEASE"]).unwrap()
    }

    #[test]
    fn open_entity_must_continue_or_close() {
        let s = scheme();
        let open = TransitionState { position: 0, open_entity: Some(0) };
        assert_eq!(valid_actions(open, &s, false), [Action::Inside(0), Action::Last(0)]);
        assert_eq!(valid_actions(open, &s, true), [Action::Last(0)]);
    }

    #[test]
    fn no_begin_on_last_token() {
        let s = scheme();
        assert_eq!(
            valid_actions(TransitionState::default(), &s, true),
            [Action::Out, Action::Unit(0), Action::Unit(1)]
        );
        assert_eq!(valid_actions(TransitionState::default(), &s, false).len(), 5);
    }

    #[test]
    fn every_reachable_state_has_a_legal_action() {
        for n in 1..=4 {
            let s = LabelScheme::new(&["A", "B", "C"][..n.min(3)]).unwrap();
            let states = core::iter::once(None).chain((0..s.labels().len()).map(Some));
            for open in states {
                for is_last in [false, true] {
                    let st = TransitionState { position: 0, open_entity: open };
                    assert!(!valid_actions(st, &s, is_last).is_empty());
                }
            }
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let s = scheme();
        let acts = greedy_decode(3, &s, |_, _, out| out.fill(1.0));
        assert_eq!(acts, [Action::Out; 3]);
    }
}
