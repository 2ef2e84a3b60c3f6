/* tslint:disable */
/* eslint-disable */

/**
 * Largest deviation from the mean after each gossip round, starting from
 * random parameters. `topology` is `complete`, `ring` or `star`.
 */
export function consensus_deviation(topology: string, agents: number, rounds: number, seed: bigint): Float64Array;

/**
 * RMS error of the averaged estimate on the random walk after each
 * episode, averaged over `replications` fleets of `agents` learners.
 * `lambda < 0` selects TD(0).
 */
export function fleet_rms_curve(agents: number, episodes: bigint, alpha: number, lambda: number, replications: bigint, seed: bigint): Float64Array;

/**
 * For the chain with `P(0→1) = p`, `P(1→0) = q`: the distance to
 * stationarity `d(t)` followed by the Markov noise at `θ = 0`, each of
 * length `t_max + 1`.
 */
export function two_state_mixing(p: number, q: number, gamma: number, t_max: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly consensus_deviation: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly fleet_rms_curve: (a: number, b: bigint, c: number, d: number, e: bigint, f: bigint) => [number, number, number, number];
    readonly two_state_mixing: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
