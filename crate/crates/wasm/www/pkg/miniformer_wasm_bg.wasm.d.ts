/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_copymodel_free: (a: number, b: number) => void;
export const __wbg_decoded_free: (a: number, b: number) => void;
export const copymodel_decode: (a: number, b: number, c: number) => [number, number, number];
export const copymodel_epochs: (a: number) => number;
export const copymodel_new: (a: number) => [number, number, number];
export const copymodel_trainEpoch: (a: number) => [number, number, number];
export const copymodel_words: (a: number) => [number, number];
export const decoded_output: (a: number) => [number, number];
export const decoded_source: (a: number) => [number, number];
export const decoded_steps: (a: number) => number;
export const decoded_weights: (a: number) => [number, number];
export const positionalEncoding: (a: number, b: number) => [number, number, number, number];
export const score: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
