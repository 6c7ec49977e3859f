# Components package