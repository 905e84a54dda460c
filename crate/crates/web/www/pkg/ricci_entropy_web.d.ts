/* tslint:disable */
/* eslint-disable */

/**
 * Check ids applicable to the scenario's flow.
 */
export function checkIds(config: string): string;

/**
 * `W` and `N` on the scenario's schedule at its first base point, with
 * limits when at least three samples are requested.
 */
export function entropyCurve(config: string): string;

/**
 * Kernel values on the slice `base_time - tau`, by first coordinate.
 *
 * Returns `{time, method, q, h, valid, mass}`.
 */
export function kernelProfile(config: string, tau: number): string;

/**
 * One catalog check on the scenario; the report without CSV bodies.
 */
export function runCheck(id: string, config: string): string;

export function version(): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly checkIds: (a: number, b: number) => [number, number, number, number];
    readonly entropyCurve: (a: number, b: number) => [number, number, number, number];
    readonly kernelProfile: (a: number, b: number, c: number) => [number, number, number, number];
    readonly runCheck: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly version: () => [number, number];
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
