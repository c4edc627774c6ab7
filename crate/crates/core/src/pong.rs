//! The simplified Pong environment: a ball launched from the top of a
//! rectangular field descends at 45 degrees, reflecting off the side and
//! top walls, while a paddle slides along the bottom row trying to be
//! under it when it arrives.
//!
//! Distances are measured in column widths, time in game steps. Column
//! `c` spans x in [c, c+1), so its center is at c + 0.5. The bottom row
//! (y = 0) is absorbing: a trajectory ends the moment it reaches it.

use crate::error::{Error, Result};

/// Field geometry and movement speeds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldConfig {
    /// Number of columns; the field spans x in [0, n_columns].
    pub n_columns: usize,
    /// Height of the field (column widths).
    pub field_height: f64,
    /// Ball speed along its 45-degree diagonal (column widths per step).
    pub ball_speed: f64,
    /// Maximum paddle movement per step (column widths).
    pub paddle_speed: f64,
    /// Paddle half-width (column widths).
    pub paddle_halfwidth: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            n_columns: 32,
            field_height: 32.0,
            ball_speed: 1.0,
            paddle_speed: 1.0,
            paddle_halfwidth: 1.0,
        }
    }
}

impl FieldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_columns < 2 {
            return Err(Error::Config(format!(
                "field needs at least 2 columns, got {}",
                self.n_columns
            )));
        }
        if !(self.field_height > 0.0) {
            return Err(Error::Config(format!(
                "field height must be positive, got {}",
                self.field_height
            )));
        }
        // The speed cap keeps one reflection per step sufficient.
        let cap = self.field_height.min(self.n_columns as f64);
        if !(self.ball_speed > 0.0) || self.ball_speed > cap {
            return Err(Error::Config(format!(
                "ball speed must lie in (0, {cap}], got {}",
                self.ball_speed
            )));
        }
        if !(self.paddle_speed > 0.0) {
            return Err(Error::Config(format!(
                "paddle speed must be positive, got {}",
                self.paddle_speed
            )));
        }
        if !(self.paddle_halfwidth >= 0.0) {
            return Err(Error::Config(format!(
                "paddle half-width must be non-negative, got {}",
                self.paddle_halfwidth
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.n_columns as f64
    }
}

/// Shape of the aiming reward.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardSchedule {
    /// Reward reaches zero once the aim misses by more than this many
    /// columns.
    pub halfwidth: usize,
}

impl Default for RewardSchedule {
    fn default() -> Self {
        RewardSchedule { halfwidth: 1 }
    }
}

impl RewardSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.halfwidth == 0 {
            return Err(Error::Config(
                "reward halfwidth must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Full kinematic state of one rally.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GameState {
    pub ball_x: f64,
    pub ball_y: f64,
    pub ball_vx: f64,
    pub ball_vy: f64,
    /// Paddle center position.
    pub paddle_x: f64,
    /// Where the paddle is currently told to go.
    pub paddle_target_x: f64,
}

impl GameState {
    /// Launches a ball from the top of `start_column`, descending at 45
    /// degrees toward the center of the field, with the paddle centered.
    pub fn launch(config: &FieldConfig, start_column: usize) -> Result<GameState> {
        config.validate()?;
        if start_column >= config.n_columns {
            return Err(Error::Parameter(format!(
                "start column {start_column} out of range for {} columns",
                config.n_columns
            )));
        }
        let x0 = start_column as f64 + 0.5;
        let direction = if x0 <= config.width() / 2.0 { 1.0 } else { -1.0 };
        let component = config.ball_speed / std::f64::consts::SQRT_2;
        let center = config.width() / 2.0;
        Ok(GameState {
            ball_x: x0,
            ball_y: config.field_height,
            ball_vx: direction * component,
            ball_vy: -component,
            paddle_x: center,
            paddle_target_x: center,
        })
    }

    /// True once the ball has reached the bottom row. The state no
    /// longer changes after this.
    pub fn at_paddle_row(&self) -> bool {
        self.ball_y <= 0.0
    }

    /// Points the paddle at the center of `column`.
    pub fn set_target_column(&mut self, column: usize) {
        self.paddle_target_x = column as f64 + 0.5;
    }
}

/// Column currently containing the ball.
pub fn discretize_ball(state: &GameState, n_columns: usize) -> usize {
    let col = state.ball_x.floor() as isize;
    col.clamp(0, n_columns as isize - 1) as usize
}

fn step_once(state: &GameState, config: &FieldConfig) -> GameState {
    if state.at_paddle_row() {
        return *state;
    }
    let width = config.width();
    let mut vx = state.ball_vx;
    let mut vy = state.ball_vy;

    // If the ball would pass below the bottom row, stop the whole step
    // at the exact crossing instant instead.
    let y_full = state.ball_y + vy;
    let fraction = if y_full < 0.0 {
        state.ball_y / -vy
    } else {
        1.0
    };
    let mut x = state.ball_x + vx * fraction;
    let mut y = if y_full < 0.0 { 0.0 } else { y_full };

    // Specular reflection off the side walls.
    loop {
        if x < 0.0 {
            x = -x;
            vx = -vx;
        } else if x > width {
            x = 2.0 * width - x;
            vx = -vx;
        } else {
            break;
        }
    }
    // And off the top wall.
    if y > config.field_height {
        y = 2.0 * config.field_height - y;
        vy = -vy;
    }

    // The paddle closes in on its target at constant speed, scaled by
    // the same step fraction as the ball, and never overshoots.
    let reach = config.paddle_speed * fraction;
    let gap = state.paddle_target_x - state.paddle_x;
    let paddle_x = if gap.abs() <= reach {
        state.paddle_target_x
    } else {
        state.paddle_x + reach * gap.signum()
    };

    GameState {
        ball_x: x,
        ball_y: y,
        ball_vx: vx,
        ball_vy: vy,
        paddle_x,
        paddle_target_x: state.paddle_target_x,
    }
}

/// Advances the rally by `n_steps` unit time steps. Reaching the bottom
/// row is terminal: further steps return the state unchanged.
pub fn step_game(state: &GameState, config: &FieldConfig, n_steps: usize) -> GameState {
    let mut s = *state;
    for _ in 0..n_steps {
        s = step_once(&s, config);
    }
    s
}

/// True when the paddle covers the ball position. The half-column slack
/// accepts any ball whose column the paddle edge touches.
pub fn is_catch(state: &GameState, config: &FieldConfig) -> bool {
    (state.paddle_x - state.ball_x).abs() <= config.paddle_halfwidth + 0.5
}

/// Graded aiming reward: 1 when the commanded column is the ball's
/// column, decaying linearly to 0 at a miss of `halfwidth + 1` columns.
pub fn compute_reward(
    ball_column: usize,
    action_column: usize,
    schedule: &RewardSchedule,
) -> Result<f64> {
    schedule.validate()?;
    let miss = ball_column.abs_diff(action_column) as f64;
    Ok((1.0 - miss / (schedule.halfwidth as f64 + 1.0)).max(0.0))
}

/// Plays one rally under a column-to-column policy, retargeting the
/// paddle from the ball's current column before every step. Returns all
/// visited states (including the launch state) and whether the final
/// state is a catch.
pub fn play_episode(
    policy: &[usize],
    config: &FieldConfig,
    start_column: usize,
) -> Result<(Vec<GameState>, bool)> {
    if policy.len() != config.n_columns {
        return Err(Error::Parameter(format!(
            "policy covers {} columns but the field has {}",
            policy.len(),
            config.n_columns
        )));
    }
    let mut state = GameState::launch(config, start_column)?;
    let mut states = vec![state];
    // The descent takes height / (speed / sqrt(2)) steps; the margin
    // only guards against a non-terminating loop on a broken geometry.
    let max_steps =
        4 * (config.field_height / (config.ball_speed / std::f64::consts::SQRT_2)).ceil() as usize
            + 8;
    for _ in 0..max_steps {
        if state.at_paddle_row() {
            break;
        }
        let column = discretize_ball(&state, config.n_columns);
        let action = policy[column];
        if action >= config.n_columns {
            return Err(Error::Parameter(format!(
                "policy action {action} out of range for {} columns",
                config.n_columns
            )));
        }
        state.set_target_column(action);
        state = step_once(&state, config);
        states.push(state);
    }
    if !state.at_paddle_row() {
        return Err(Error::Config(
            "rally failed to reach the paddle row; geometry is inconsistent".into(),
        ));
    }
    let caught = is_catch(&state, config);
    Ok((states, caught))
}

/// Fraction of the `n_columns` possible launch columns the policy
/// catches, each rally played to the bottom row.
pub fn evaluate_catch_fraction(policy: &[usize], config: &FieldConfig) -> Result<f64> {
    let mut catches = 0;
    for start in 0..config.n_columns {
        let (_, caught) = play_episode(policy, config, start)?;
        if caught {
            catches += 1;
        }
    }
    Ok(catches as f64 / config.n_columns as f64)
}
