//! Payoff arithmetic for each game. All functions are pure.

use super::{BinaryAction, Contribution, GameError, Multiplier, NpdPayoffRule, Phase, PunishmentAllocation, Tokens};

const STAG_ALL: i64 = 10;
const HARE: i64 = 3;

const PD_REWARD: i64 = 3;
const PD_TEMPTATION: i64 = 5;
const PD_SUCKER: i64 = 0;
const PD_PUNISHMENT: i64 = 1;

fn check_arity<T>(items: &[T], expected: usize) -> Result<(), GameError> {
    if items.len() != expected {
        return Err(GameError::Arity {
            expected,
            got: items.len(),
        });
    }
    Ok(())
}

fn wrong_move(choice: BinaryAction, game: &str) -> GameError {
    GameError::WrongAction {
        expected: Phase::Act,
        detail: format!("{choice} is not a {game} move"),
    }
}

/// All stag hunters earn 10 if everyone hunts stag; otherwise stag hunters earn 0
/// and hare hunters earn 3.
pub fn resolve_stag_hunt(choices: &[BinaryAction], n_players: usize) -> Result<Vec<Tokens>, GameError> {
    check_arity(choices, n_players)?;
    let mut all_stag = true;
    for &c in choices {
        match c {
            BinaryAction::HuntStag => {}
            BinaryAction::HuntHare => all_stag = false,
            other => return Err(wrong_move(other, "Stag Hunt")),
        }
    }
    Ok(choices
        .iter()
        .map(|&c| match (all_stag, c) {
            (true, _) => Tokens::whole(STAG_ALL),
            (false, BinaryAction::HuntHare) => Tokens::whole(HARE),
            (false, _) => Tokens::ZERO,
        })
        .collect())
}

fn pd_pair(me: bool, other: bool) -> i64 {
    match (me, other) {
        (true, true) => PD_REWARD,
        (true, false) => PD_SUCKER,
        (false, true) => PD_TEMPTATION,
        (false, false) => PD_PUNISHMENT,
    }
}

fn pd_cooperates(choice: BinaryAction) -> Result<bool, GameError> {
    match choice {
        BinaryAction::Cooperate => Ok(true),
        BinaryAction::Defect => Ok(false),
        other => Err(wrong_move(other, "Prisoner's Dilemma")),
    }
}

pub fn resolve_ipd2(a: BinaryAction, b: BinaryAction) -> Result<(Tokens, Tokens), GameError> {
    let (a, b) = (pd_cooperates(a)?, pd_cooperates(b)?);
    Ok((Tokens::whole(pd_pair(a, b)), Tokens::whole(pd_pair(b, a))))
}

/// N-player prisoner's dilemma. With `others` cooperating opponents, a cooperator
/// earns `3 * others`; a defector earns `5 * others` plus either 1 per defecting
/// opponent ([`NpdPayoffRule::PairwiseSum`]) or a flat 1 ([`NpdPayoffRule::BasePlusOne`]).
pub fn resolve_nipd(choices: &[BinaryAction], rule: NpdPayoffRule) -> Result<Vec<Tokens>, GameError> {
    if choices.len() < 2 {
        return Err(GameError::Arity {
            expected: 2,
            got: choices.len(),
        });
    }
    let coop: Vec<bool> = choices.iter().map(|&c| pd_cooperates(c)).collect::<Result<_, _>>()?;
    let total = coop.iter().filter(|&&c| c).count() as i64;
    let n_others = choices.len() as i64 - 1;
    Ok(coop
        .iter()
        .map(|&me| {
            let others = total - i64::from(me);
            let points = if me {
                PD_REWARD * others
            } else {
                match rule {
                    NpdPayoffRule::PairwiseSum => PD_TEMPTATION * others + PD_PUNISHMENT * (n_others - others),
                    NpdPayoffRule::BasePlusOne => PD_TEMPTATION * others + PD_PUNISHMENT,
                }
            };
            Tokens::whole(points)
        })
        .collect())
}

/// Contribution-stage payoff: `(endowment - c_i) + multiplier * sum(c) / n`, exact in tenths.
pub fn resolve_pgg(
    contributions: &[Contribution],
    endowment: u32,
    multiplier: Multiplier,
) -> Result<Vec<Tokens>, GameError> {
    if contributions.is_empty() {
        return Err(GameError::Arity { expected: 1, got: 0 });
    }
    for &Contribution(amount) in contributions {
        if amount > endowment {
            return Err(GameError::ContributionOutOfRange { amount, endowment });
        }
    }
    let n = contributions.len() as i64;
    let pot: i64 = contributions.iter().map(|c| i64::from(c.0)).sum();
    let scaled = i64::from(multiplier.tenths()) * pot;
    if scaled % n != 0 {
        return Err(GameError::InvalidSpec(format!(
            "pot share {scaled}/{n} tenths is not exact"
        )));
    }
    let share = Tokens::from_tenths(scaled / n);
    Ok(contributions
        .iter()
        .map(|c| Tokens::whole(i64::from(endowment) - i64::from(c.0)) + share)
        .collect())
}

/// Applies all punishment orders simultaneously: each spender pays what they spend
/// and each target loses `punish_ratio` per token spent on them. No floor.
pub fn apply_punishments(
    stage_payoffs: &[Tokens],
    allocations: &[PunishmentAllocation],
    punish_ratio: u32,
) -> Result<Vec<Tokens>, GameError> {
    check_arity(allocations, stage_payoffs.len())?;
    let n = stage_payoffs.len();
    let mut out = stage_payoffs.to_vec();
    for (spender, alloc) in allocations.iter().enumerate() {
        alloc.validate(spender, n)?;
        for s in &alloc.spends {
            let spend = i64::from(s.spend);
            out[spender] -= Tokens::whole(spend);
            out[s.target] -= Tokens::whole(spend * i64::from(punish_ratio));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use BinaryAction::*;

    fn whole(v: &[i64]) -> Vec<Tokens> {
        v.iter().map(|&x| Tokens::whole(x)).collect()
    }

    fn contribs(v: &[u32]) -> Vec<Contribution> {
        v.iter().map(|&c| Contribution(c)).collect()
    }

    #[test]
    fn stag_hunt_examples() {
        assert_eq!(resolve_stag_hunt(&[HuntStag; 4], 4).unwrap(), whole(&[10, 10, 10, 10]));
        assert_eq!(
            resolve_stag_hunt(&[HuntStag, HuntStag, HuntStag, HuntHare], 4).unwrap(),
            whole(&[0, 0, 0, 3])
        );
        assert_eq!(resolve_stag_hunt(&[HuntHare; 4], 4).unwrap(), whole(&[3, 3, 3, 3]));
        assert!(matches!(
            resolve_stag_hunt(&[HuntStag; 3], 4),
            Err(GameError::Arity { expected: 4, got: 3 })
        ));
        assert!(resolve_stag_hunt(&[Cooperate; 4], 4).is_err());
    }

    #[test]
    fn ipd2_examples() {
        assert_eq!(resolve_ipd2(Cooperate, Cooperate).unwrap(), (Tokens::whole(3), Tokens::whole(3)));
        assert_eq!(resolve_ipd2(Defect, Defect).unwrap(), (Tokens::whole(1), Tokens::whole(1)));
        assert_eq!(resolve_ipd2(Defect, Cooperate).unwrap(), (Tokens::whole(5), Tokens::ZERO));
        assert_eq!(resolve_ipd2(Cooperate, Defect).unwrap(), (Tokens::ZERO, Tokens::whole(5)));
        assert!(resolve_ipd2(HuntStag, Defect).is_err());
    }

    #[test]
    fn nipd_examples() {
        let rule = NpdPayoffRule::PairwiseSum;
        assert_eq!(resolve_nipd(&[Cooperate; 4], rule).unwrap(), whole(&[9; 4]));
        assert_eq!(resolve_nipd(&[Defect; 4], rule).unwrap(), whole(&[3; 4]));
        assert_eq!(resolve_nipd(&[Defect; 4], NpdPayoffRule::BasePlusOne).unwrap(), whole(&[1; 4]));
        assert_eq!(
            resolve_nipd(&[Defect, Cooperate, Cooperate, Cooperate], rule).unwrap(),
            whole(&[15, 6, 6, 6])
        );
    }

    #[test]
    fn pgg_examples() {
        let m = Multiplier::default();
        assert_eq!(resolve_pgg(&contribs(&[0, 0, 0, 0]), 20, m).unwrap(), whole(&[20; 4]));
        assert_eq!(resolve_pgg(&contribs(&[20, 20, 20, 20]), 20, m).unwrap(), whole(&[32; 4]));
        assert_eq!(
            resolve_pgg(&contribs(&[0, 20, 20, 20]), 20, m).unwrap(),
            whole(&[44, 24, 24, 24])
        );
        assert_eq!(
            resolve_pgg(&contribs(&[1, 0, 0, 0]), 20, m).unwrap(),
            vec![
                Tokens::from_tenths(194),
                Tokens::from_tenths(204),
                Tokens::from_tenths(204),
                Tokens::from_tenths(204)
            ]
        );
        assert!(matches!(
            resolve_pgg(&contribs(&[21, 0, 0, 0]), 20, m),
            Err(GameError::ContributionOutOfRange { amount: 21, endowment: 20 })
        ));
    }

    #[test]
    fn punishment_examples() {
        let stage = whole(&[30, 30, 30, 30]);
        let none = vec![PunishmentAllocation::none(); 4];
        assert_eq!(apply_punishments(&stage, &none, 3).unwrap(), stage);

        let mut allocs = none.clone();
        allocs[0] = PunishmentAllocation::from_pairs([(2, 2)]);
        assert_eq!(apply_punishments(&stage, &allocs, 3).unwrap(), whole(&[28, 30, 24, 30]));

        let mut allocs = none.clone();
        allocs[0] = PunishmentAllocation::from_pairs([(3, 1)]);
        allocs[1] = PunishmentAllocation::from_pairs([(3, 1)]);
        assert_eq!(apply_punishments(&stage, &allocs, 3).unwrap(), whole(&[29, 29, 30, 24]));

        let mut allocs = none;
        allocs[1] = PunishmentAllocation::from_pairs([(1, 1)]);
        assert!(matches!(
            apply_punishments(&stage, &allocs, 3),
            Err(GameError::SelfPunishment { player: 1 })
        ));
    }

    #[test]
    fn punishment_can_go_negative() {
        let stage = whole(&[20, 20, 20, 20]);
        let allocs = vec![
            PunishmentAllocation::from_pairs([(3, 10)]),
            PunishmentAllocation::none(),
            PunishmentAllocation::none(),
            PunishmentAllocation::none(),
        ];
        assert_eq!(apply_punishments(&stage, &allocs, 3).unwrap()[3], Tokens::whole(-10));
    }
}
