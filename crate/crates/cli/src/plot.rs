//! Optional plotting stub written next to the data. It only reads the files
//! of the run it belongs to; nothing is plotted in-process.

use std::fmt::Write as _;

use crate::config::Format;
use crate::run::RunResult;

/// A matplotlib script that draws every table of `result`.
pub fn script(result: &RunResult) -> String {
    let format = result.config.output.format;
    let mut s = String::new();
    s.push_str("#!/usr/bin/env python3\n");
    writeln!(s, "# Plots the output of preset {:?} (task {}).", result.config.preset, result.config.task.name()).unwrap();
    s.push_str("# Run from the output directory. Needs pandas and matplotlib.\n");
    s.push_str("import pandas as pd\nimport matplotlib.pyplot as plt\n\n");
    let reader = match format {
        Format::Csv => "pd.read_csv",
        Format::Json => "pd.read_json",
    };
    writeln!(s, "read = {reader}\n").unwrap();

    for t in &result.tables {
        let file = t.file_name(format);
        let name = &t.name;
        if name == "populations" || name == "scan" {
            let series: Vec<&str> =
                t.columns.iter().skip(1).map(String::as_str).filter(|c| !c.ends_with("_GHz") && !c.ends_with("_ns")).collect();
            let group = t.columns.get(1).filter(|c| c.ends_with("_GHz") || c.ends_with("_ns"));
            writeln!(s, "df = read({file:?})").unwrap();
            match group {
                None => {
                    writeln!(s, "fig, ax = plt.subplots()").unwrap();
                    writeln!(s, "for col in {series:?}:\n    ax.plot(df['t_ns'], df[col], label=col)").unwrap();
                    writeln!(s, "ax.set_xlabel('t (ns)')\nax.set_ylabel('population')\nax.legend()").unwrap();
                }
                Some(g) => {
                    writeln!(s, "for col in {series:?}:").unwrap();
                    writeln!(s, "    m = df.pivot(index={g:?}, columns='t_ns', values=col)").unwrap();
                    writeln!(s, "    fig, ax = plt.subplots()").unwrap();
                    writeln!(
                        s,
                        "    ax.pcolormesh(m.columns, m.index, m.values, shading='auto')\n    ax.set_xlabel('t (ns)')\n    ax.set_ylabel({g:?})\n    ax.set_title(col)"
                    )
                    .unwrap();
                }
            }
            writeln!(s, "fig.savefig({:?})\n", format!("{name}.png")).unwrap();
        } else if name.starts_with("trps_") {
            writeln!(s, "df = read({file:?})").unwrap();
            writeln!(s, "for (obs, ds), part in df.groupby(['observable', 'delta_s_GHz']):").unwrap();
            writeln!(s, "    m = part.pivot(index='omega_GHz', columns='t_ns', values='intensity')").unwrap();
            writeln!(s, "    fig, ax = plt.subplots()").unwrap();
            writeln!(s, "    ax.pcolormesh(m.columns, m.index, m.values, shading='auto')").unwrap();
            writeln!(s, "    ax.set_xlabel('t (ns)')\n    ax.set_ylabel('omega (GHz)')").unwrap();
            writeln!(s, "    ax.set_title(f'{name} {{obs}} delta_s={{ds}} GHz')").unwrap();
            writeln!(s, "    fig.savefig(f'{name}_{{obs}}_{{ds:g}}.png')\n").unwrap();
        } else if name.starts_with("frequency_integrated_") || name.starts_with("time_integrated_") {
            let x = if name.starts_with("frequency") { "t_ns" } else { "omega_GHz" };
            writeln!(s, "df = read({file:?})\nfig, ax = plt.subplots()").unwrap();
            writeln!(s, "for (obs, ds), part in df.groupby(['observable', 'delta_s_GHz']):").unwrap();
            writeln!(s, "    ax.plot(part[{x:?}], part['integrated_intensity'], label=f'{{obs}} {{ds:g}} GHz')").unwrap();
            writeln!(s, "ax.set_xlabel({x:?})\nax.legend()\nfig.savefig({:?})\n", format!("{name}.png")).unwrap();
        } else if name == "bench" {
            writeln!(s, "df = read({file:?})\nfig, ax = plt.subplots(1, 2)").unwrap();
            writeln!(s, "for i, axis in enumerate(['Nt', 'Nw']):").unwrap();
            writeln!(s, "    for method, part in df[df['axis'] == axis].groupby('method'):").unwrap();
            writeln!(s, "        ax[i].loglog(part['size'], part['runtime_s'], 'o-', label=method)").unwrap();
            writeln!(s, "    ax[i].set_xlabel(axis)\n    ax[i].legend()").unwrap();
            writeln!(s, "fig.savefig('bench.png')\n").unwrap();
        }
    }
    s.push_str("plt.show()\n");
    s
}
