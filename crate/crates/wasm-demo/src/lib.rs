//! wasm-bindgen bindings behind `www/index.html`.

use flowsense::env::{ActionCommand, EnvConfig, Environment, MotionKind};
use flowsense::nn::ParameterSet;
use flowsense::perception::network::encode_spatial_prefixed;
use flowsense::perception::{fit_input_norm, init_perception};
use wasm_bindgen::prelude::*;

fn js(e: flowsense::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn motion(name: &str) -> Option<MotionKind> {
    match name {
        "random-waypoint" => Some(MotionKind::random_waypoint()),
        "intermittent" => Some(MotionKind::intermittent()),
        "one-sided-sine" => Some(MotionKind::one_sided_sine()),
        "still" => Some(MotionKind::Still),
        _ => None,
    }
}

/// The surrogate environment plus an untrained spatial encoder.
#[wasm_bindgen]
pub struct FlowDemo {
    env: Environment,
    encoder: ParameterSet<f32>,
    pressure: Vec<f64>,
    cd: Vec<f64>,
    obstacle: Vec<f64>,
    agent: Vec<f64>,
}

const HISTORY: usize = 600;

#[wasm_bindgen]
impl FlowDemo {
    /// `motion` is one of `random-waypoint`, `intermittent`,
    /// `one-sided-sine` or `still`.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, motion_name: &str) -> Result<FlowDemo, JsError> {
        let config = EnvConfig {
            obstacle: motion(motion_name)
                .ok_or_else(|| JsError::new(&format!("unknown motion `{motion_name}`")))?,
            seed,
            ..EnvConfig::default()
        };
        let mut env = Environment::new(config).map_err(js)?;
        let warm = env.record_dataset(10.0).map_err(js)?;
        let rows: Vec<f32> = warm
            .records
            .iter()
            .flat_map(|r| r.pressure.iter().copied())
            .collect();
        let mut encoder = init_perception(seed).map_err(js)?;
        fit_input_norm(&mut encoder, "", &rows).map_err(js)?;
        let mut demo = FlowDemo {
            env,
            encoder,
            pressure: Vec::new(),
            cd: Vec::new(),
            obstacle: Vec::new(),
            agent: Vec::new(),
        };
        demo.advance(1)?;
        Ok(demo)
    }

    fn record(&mut self, cd: f64, pressure: Vec<f64>) {
        let y_obs = self.env.obstacle_y();
        self.cd.push(cd);
        self.obstacle.push(y_obs);
        self.agent.push(self.env.agent_y());
        for h in [&mut self.cd, &mut self.obstacle, &mut self.agent] {
            if h.len() > HISTORY {
                h.drain(..h.len() - HISTORY);
            }
        }
        self.pressure = pressure;
    }

    /// Advance `samples` ticks of 0.1 time units with the agent held.
    pub fn advance(&mut self, samples: usize) -> Result<(), JsError> {
        for _ in 0..samples {
            let r = self.env.tick().map_err(js)?;
            let p = r.pressure.iter().map(|&v| v as f64).collect();
            self.record(r.cd as f64, p);
        }
        Ok(())
    }

    /// Move the agent across the centerline to `|a_pos|` at speed `a_vel`
    /// and return the reward, the negated mean drag over the move.
    pub fn act(&mut self, a_pos: f64, a_vel: f64) -> Result<f64, JsError> {
        let action = ActionCommand::new(a_pos, a_vel).map_err(js)?;
        self.env.reset().map_err(js)?;
        let out = self.env.step(action).map_err(js)?;
        let samples = out.info.cd_samples.len();
        for (k, &cd) in out.info.cd_samples.iter().enumerate() {
            let row = &out.window[out.window.len() - (samples - k) * 200..][..200];
            self.record(cd, row.iter().map(|&v| v as f64).collect());
        }
        Ok(out.reward)
    }

    /// Spatial feature (50 values) of the latest pressure snapshot.
    pub fn features(&self) -> Result<Vec<f32>, JsError> {
        let p: Vec<f32> = self.pressure.iter().map(|&v| v as f32).collect();
        encode_spatial_prefixed(&self.encoder, "", &p).map_err(js)
    }

    /// Pressure coefficients at the 200 sensors, sensor 0 facing upstream.
    pub fn pressure(&self) -> Vec<f64> {
        self.pressure.clone()
    }

    pub fn cd_history(&self) -> Vec<f64> {
        self.cd.clone()
    }

    pub fn obstacle_history(&self) -> Vec<f64> {
        self.obstacle.clone()
    }

    pub fn agent_history(&self) -> Vec<f64> {
        self.agent.clone()
    }

    pub fn time(&self) -> f64 {
        self.env.time()
    }
}
