/* tslint:disable */
/* eslint-disable */

export class CopyModel {
    free(): void;
    [Symbol.dispose](): void;
    decode(input: string): Decoded;
    epochs(): number;
    constructor(seed: number);
    trainEpoch(): number;
    words(): string[];
}

export class Decoded {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    output(): string[];
    source(): string[];
    steps(): number;
    weights(): Float64Array;
}

export function positionalEncoding(len: number, d_model: number): Float64Array;

export function score(hyp: string, reference: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_copymodel_free: (a: number, b: number) => void;
    readonly __wbg_decoded_free: (a: number, b: number) => void;
    readonly copymodel_decode: (a: number, b: number, c: number) => [number, number, number];
    readonly copymodel_epochs: (a: number) => number;
    readonly copymodel_new: (a: number) => [number, number, number];
    readonly copymodel_trainEpoch: (a: number) => [number, number, number];
    readonly copymodel_words: (a: number) => [number, number];
    readonly decoded_output: (a: number) => [number, number];
    readonly decoded_source: (a: number) => [number, number];
    readonly decoded_steps: (a: number) => number;
    readonly decoded_weights: (a: number) => [number, number];
    readonly positionalEncoding: (a: number, b: number) => [number, number, number, number];
    readonly score: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __externref_drop_slice: (a: number, b: number) => void;
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
