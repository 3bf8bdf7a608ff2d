/** Wire types for the /v1 forecast API plus UI-side session shapes. */
export {};
